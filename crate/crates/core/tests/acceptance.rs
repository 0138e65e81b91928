//! The ten acceptance criteria. Each prints one `criterion N: PASS|FAIL` line; the
//! test fails if any criterion does.

mod common;

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use pctlmc::absorbing::{las_finite, las_graph, simplicity_by_support};
use pctlmc::checker::FiniteContext;
use pctlmc::decompose::{
    decompose_invariance, excessive_set, excision_region, verify_local_excessivity, ExcessiveCandidate,
};
use pctlmc::discretize::{discretize, LambdaSpec};
use pctlmc::engine::{bounded_invariance, bounded_reach_avoid};
use pctlmc::formula::{verify_partial, Formula, PathFormula};
use pctlmc::horizon::{compute_m_rho, plan_horizon, tail_bound, unbounded_reach_avoid, HorizonOptions};
use pctlmc::kernel::analytic::{affine_gauss_drift, affine_gauss_moment, normal_pdf};
use pctlmc::kernel::quad::integrate;
use pctlmc::kernel::{DensityKernel, MatrixKernel};
use pctlmc::mclinear::{solve_invariance_exact, solve_reach_avoid_exact, simplicity_battery, uniqueness_iff_trivial};
use pctlmc::montecarlo::{estimate_invariance, Horizon, Simulator};
use pctlmc::space::{region_from_box, Region, StateSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ORACLE_TOL: f64 = 1e-6;
const ITERATION_TAIL: f64 = 1e-8;
const PLAN_EPS: f64 = 1e-3;
const ABSORBING_TOL: f64 = 1e-12;
const CHAINS: usize = 200;
const NESTED_CHAINS: usize = 50;
const NESTED_DELTA: f64 = 1e-3;

const DRIFT_MU: f64 = 0.0;
const DRIFT_SIGMA_UP: f64 = 2.0;
const DRIFT_CELLS: usize = 512;
const DRIFT_MC_SAMPLES: usize = 100_000;
const DRIFT_MC_CUTOFF: usize = 10_000;
const DRIFT_BOUND: f64 = 0.02;
const DRIFT_RADIUS: f64 = 0.1;

const DECAY_SIGMA: f64 = 1.0;
const DECAY_B1: f64 = 0.79788;
const DECAY_B1_TOL: f64 = 1e-6;
const DECAY_EPS: f64 = 0.05;
const DECAY_TAIL: f64 = 0.01;
const DECAY_CELLS: usize = 4000;
const DECAY_MC_SAMPLES: usize = 100_000;
const DECAY_MC_CUTOFF: usize = 200;
const DECAY_Z: f64 = 3.0;

const SQUARE_CELLS: usize = 60;
const SQUARE_LEVEL: f64 = 0.25;
const SQUARE_RHO: (f64, f64) = (0.90, 0.99);
const SQUARE_N: usize = 50;
const SQUARE_CORNER_DIST: f64 = 0.1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(limit: Duration, started: Instant) -> (bool, String) {
    let t = started.elapsed();
    (t <= limit, format!("{:.1}s of {}s", t.as_secs_f64(), limit.as_secs()))
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One random instance of criterion 1: a chain with disjoint `A`, `B`.
struct Instance {
    k: MatrixKernel,
    a: Region,
    b: Region,
}

fn oracle_instances() -> Vec<Instance> {
    let mut r = rng(1);
    (0..CHAINS)
        .map(|_| {
            let n = r.random_range(2..=50);
            let k = common::random_chain(&mut r, n);
            let (a, b) = common::random_disjoint(&mut r, k.space());
            Instance { k, a, b }
        })
        .collect()
}

/// `A` without the largest absorbing subset of `A \ B`; `w` is unchanged by the cut.
fn simple_part(inst: &Instance) -> Region {
    let avoid = inst.a.difference(&inst.b).unwrap();
    inst.a.difference(&las_finite(&inst.k, &avoid).las).unwrap()
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut worst = 0.0f64;
    let mut excised = 0;
    for inst in oracle_instances() {
        let exact = solve_reach_avoid_exact(&inst.k, &inst.a, &inst.b).unwrap();
        let a = simple_part(&inst);
        if a != inst.a {
            excised += 1;
        }
        let iterated = unbounded_reach_avoid(&inst.k, &a, &inst.b, ITERATION_TAIL).unwrap();
        worst = worst.max(exact.distance(&iterated.lower));
    }
    let (fast, time) = within(Duration::from_secs(30), started);
    outcome(
        worst <= ORACLE_TOL && fast,
        format!("max |w_exact - w_iter| = {worst:.2e} (tol {ORACLE_TOL:.0e}), {excised} non-simple instances, {time}"),
    )
}

fn criterion_2() -> Outcome {
    let started = Instant::now();
    let mut r = rng(2);
    let mut disagree = Vec::new();
    let mut wrong_kind = 0;
    for k in 0..CHAINS {
        let simple = k % 2 == 0;
        let (chain, a) = common::forced_instance(&mut r, simple);
        let rep = simplicity_battery(&chain, &a).unwrap();
        if !rep.all_agree() {
            disagree.push(format!("{k}: {rep:?}"));
        }
        if rep.simple != simple {
            wrong_kind += 1;
        }
    }
    let (fast, time) = within(Duration::from_secs(30), started);
    outcome(
        disagree.is_empty() && wrong_kind == 0 && fast,
        format!("{} disagreements {:?}, {wrong_kind} instances of the wrong kind, {time}", disagree.len(), disagree),
    )
}

fn criterion_3() -> Outcome {
    let mut violations = Vec::new();
    let mut checked = 0;
    for (k, inst) in oracle_instances().into_iter().enumerate() {
        let exact = solve_reach_avoid_exact(&inst.k, &inst.a, &inst.b).unwrap();
        let a = simple_part(&inst);
        let avoid = a.difference(&inst.b).unwrap();
        if avoid.is_empty() {
            continue;
        }
        let cert = compute_m_rho(&inst.k, &avoid, avoid.count() + 1).unwrap();
        assert!(cert.is_certified(), "instance {k}: the simple part must be contractive");
        let (m, rho) = (cert.m, cert.rho);
        let planned = plan_horizon(m, rho, PLAN_EPS).unwrap();
        for n in [1, m, 5 * m, planned] {
            let wn = bounded_reach_avoid(&inst.k, &a, &inst.b, n).unwrap();
            let tail = tail_bound(m, rho, n).unwrap();
            let gap = (0..exact.len()).map(|i| exact.get(i) - wn.get(i)).fold(f64::MIN, f64::max);
            if gap > tail + 1e-12 {
                violations.push(format!("{k}: n={n} gap {gap:.3e} > tail {tail:.3e}"));
            }
            let un = bounded_invariance(&inst.k, &avoid, n).unwrap().max_norm();
            let power = rho.powi((n / m) as i32);
            if un > power + 1e-12 {
                violations.push(format!("{k}: n={n} ||u_n|| {un:.3e} > rho^(n/m) {power:.3e}"));
            }
            checked += 1;
        }
    }
    outcome(violations.is_empty(), format!("{checked} (instance, n) pairs, violations {violations:?}"))
}

fn criterion_4() -> Outcome {
    let mut r = rng(4);
    let mut failures = Vec::new();
    for k in 0..CHAINS {
        let n = r.random_range(2..=50);
        let chain = common::random_chain(&mut r, n);
        let (a, _) = common::random_disjoint(&mut r, chain.space());
        let las = las_finite(&chain, &a).las;
        // A_{k+1} = {x in A_k : P(x, A_k) = 1}, iterated until it stops changing
        let mut an = a.clone();
        loop {
            let next = Region::from_predicate(chain.space(), |i| {
                an.contains(i) && chain.transition_prob(i, &an) >= 1.0 - ABSORBING_TOL
            });
            if next == an {
                break;
            }
            an = next;
        }
        let absorbing = las.indices().all(|i| (chain.transition_prob(i, &las) - 1.0).abs() <= ABSORBING_TOL);
        let u = solve_invariance_exact(&chain, &a).unwrap();
        let ones = u.level_set(|v| v >= 1.0 - 1e-9);
        let graph = las_graph(&chain, &a);
        if las != an || !absorbing || las != ones || las != graph {
            failures.push(format!(
                "{k}: las {} A_inf {} absorbing {absorbing} u=1 {} graph {}",
                las.count(),
                an.count(),
                ones.count(),
                graph.count()
            ));
        }
    }
    outcome(failures.is_empty(), format!("{CHAINS} chains, mismatches {failures:?}"))
}

fn criterion_5() -> Outcome {
    let mut r = rng(2);
    let mut failures = Vec::new();
    let mut nonsingular = 0;
    for k in 0..CHAINS {
        let (chain, a) = common::forced_instance(&mut r, k % 2 == 0);
        let (unique, trivial) = uniqueness_iff_trivial(&chain, &a).unwrap();
        if unique != trivial {
            failures.push(k);
        }
        nonsingular += unique as usize;
    }
    outcome(
        failures.is_empty(),
        format!("{CHAINS} instances ({nonsingular} with I - P_A nonsingular), mismatches at {failures:?}"),
    )
}

fn criterion_6() -> Outcome {
    let started = Instant::now();
    let h = affine_gauss_drift(DRIFT_MU, DRIFT_SIGMA_UP).unwrap();
    let sigma = DRIFT_SIGMA_UP;
    let h_quad = integrate(|z| (sigma * z).abs().ln() * normal_pdf(z), -12.0, 0.0, 1e-12).unwrap()
        + integrate(|z| (sigma * z).abs().ln() * normal_pdf(z), 0.0, 12.0, 1e-12).unwrap();
    let kernel = DensityKernel::affine_gauss_1d(DRIFT_MU, DRIFT_SIGMA_UP).unwrap();
    let grid = Arc::new(StateSpace::grid_1d(-1.0, 1.0, DRIFT_CELLS).unwrap());
    let abs = discretize(&kernel, grid.clone(), Some(LambdaSpec::total_variation())).unwrap();
    let a = Region::full(&grid);
    let u = abs.project(&bounded_invariance(abs.chain(), &abs.lift(&a).unwrap(), DRIFT_MC_CUTOFF).unwrap()).unwrap();
    let far = |i: usize| grid.center(i)[0].abs() >= DRIFT_RADIUS;
    let grid_max = (0..grid.len()).filter(|&i| far(i)).map(|i| u.get(i)).fold(0.0f64, f64::max);

    let sim = Simulator::Point { kernel: &kernel, grid: &grid };
    let mut mc_max = 0.0f64;
    for x in [-0.9, -0.7, -0.5, -0.3, -0.1, 0.1, 0.3, 0.5, 0.7, 0.9] {
        let est = estimate_invariance(
            sim.clone(),
            &[x],
            &a,
            Horizon::Unbounded { cutoff: DRIFT_MC_CUTOFF, tail: 0.0 },
            DRIFT_MC_SAMPLES,
            6,
        )
        .unwrap();
        mc_max = mc_max.max(est.upper());
    }
    let (fast, time) = within(Duration::from_secs(300), started);
    outcome(
        (h - h_quad).abs() < 1e-8 && h > 0.0 && grid_max <= DRIFT_BOUND && mc_max <= DRIFT_BOUND && fast,
        format!(
            "h = {h:.6} (quadrature {h_quad:.6}), max grid u_{DRIFT_MC_CUTOFF} on |x|>={DRIFT_RADIUS} = {grid_max:.2e}, \
             max MC upper 95% = {mc_max:.2e}, bound {DRIFT_BOUND}, {time}"
        ),
    )
}

fn criterion_7() -> Outcome {
    let started = Instant::now();
    let b1 = affine_gauss_moment(DRIFT_MU, DECAY_SIGMA, 1.0).unwrap();
    let b1_quad = 2.0 * integrate(|z| z * normal_pdf(z), 0.0, 40.0, 1e-13).unwrap();
    let b1_ok = (b1 - b1_quad).abs() <= DECAY_B1_TOL && (b1 - DECAY_B1).abs() <= 1e-5;

    let kernel = DensityKernel::affine_gauss_1d(DRIFT_MU, DECAY_SIGMA).unwrap();
    let grid = Arc::new(StateSpace::grid_1d(-1.0, 1.0, DECAY_CELLS).unwrap());
    let a = Region::full(&grid);
    let cand = ExcessiveCandidate::abs_power_1d(DRIFT_MU, DECAY_SIGMA, 1.0, 1.0).unwrap();
    let las = simplicity_by_support(&kernel, &a).unwrap().las;
    let report = verify_local_excessivity(&kernel, &cand, &a, &las).unwrap();
    let c = excision_region(&grid, &cand, DECAY_EPS * cand.delta);
    let abs = discretize(&kernel, grid.clone(), Some(LambdaSpec::total_variation())).unwrap();
    let lifted_a = abs.lift(&a).unwrap();
    let lifted_c = abs.lift(&c).unwrap();
    let opts = HorizonOptions {
        epsilon: DECAY_TAIL,
        m_max: None,
        lambda: abs.lambda_on(&lifted_a.difference(&lifted_c).unwrap()),
    };
    let d = match decompose_invariance(abs.chain(), &lifted_a, &lifted_c, Some(DECAY_EPS), opts) {
        Ok(d) => d,
        Err(e) => return outcome(false, format!("b(1) = {b1:.9} (quadrature {b1_quad:.9}), decomposition failed: {e}")),
    };

    let sim = Simulator::Point { kernel: &kernel, grid: &grid };
    let mut outside = Vec::new();
    let mut width = 0.0f64;
    for k in 0..20 {
        let x = -0.95 + 0.1 * k as f64;
        let cell = grid.cell_of_point(&[x]).unwrap();
        let (lo, hi) = (d.lower.get(cell).max(0.0), d.upper.get(cell).min(1.0));
        width = width.max(hi - lo);
        let tail = b1.powi(DECAY_MC_CUTOFF as i32) * x.abs();
        let est = estimate_invariance(
            sim.clone(),
            &[x],
            &a,
            Horizon::Unbounded { cutoff: DECAY_MC_CUTOFF, tail },
            DECAY_MC_SAMPLES,
            7,
        )
        .unwrap();
        if est.upper_at(DECAY_Z) < lo || est.lower_at(DECAY_Z) > hi {
            outside.push(format!("x={x:.2}: MC [{:.4},{:.4}] vs [{lo:.4},{hi:.4}]", est.lower_at(DECAY_Z), est.upper_at(DECAY_Z)));
        }
    }
    let (fast, time) = within(Duration::from_secs(600), started);
    outcome(
        b1_ok && report.passed() && outside.is_empty() && fast,
        format!(
            "b(1) = {b1:.9} (quadrature {b1_quad:.9}), excessivity {:?}, {} excised cells, m = {} rho = {:.4} n = {}, \
             ledger {:?}, max sandwich width {width:.3}, MC outside {outside:?}, {time}",
            report.status(),
            c.count(),
            d.value.cert.m,
            d.value.cert.rho,
            d.value.cert.horizon,
            d.ledger,
        ),
    )
}

fn criterion_8() -> Outcome {
    let started = Instant::now();
    let kernel = DensityKernel::nonlinear_2d();
    let grid = Arc::new(StateSpace::grid_2d((-0.6, 0.6, SQUARE_CELLS), (-0.6, 0.6, SQUARE_CELLS)).unwrap());
    let a = Region::full(&grid);
    let b = region_from_box(&grid, &[(-0.05, 0.05), (-0.05, 0.05)]).unwrap();

    let cand = ExcessiveCandidate::norm_squared_2d(SQUARE_LEVEL).unwrap();
    let ex = excessive_set(&cand, &a).unwrap();
    let low = Region::from_predicate(&grid, |i| cand.g(&grid.center(i)) < SQUARE_LEVEL);
    let sampled = low.is_subset(&ex).unwrap();

    let abs = discretize(&kernel, grid.clone(), Some(LambdaSpec::total_variation())).unwrap();
    let (la, lb) = (abs.lift(&a).unwrap(), abs.lift(&b).unwrap());
    let avoid = la.difference(&lb).unwrap();
    let cert = compute_m_rho(abs.chain(), &avoid, avoid.count() + 1).unwrap();
    let m_ok = cert.is_certified() && cert.m == 1;
    let rho_ok = (SQUARE_RHO.0..=SQUARE_RHO.1).contains(&cert.rho);

    let mut prev = vec![0.0; grid.len()];
    let mut bounded = true;
    let mut monotone = true;
    let mut w = Vec::new();
    for n in 0..=SQUARE_N {
        w = abs.project(&bounded_reach_avoid(abs.chain(), &la, &lb, n).unwrap()).unwrap().into_values();
        bounded &= w.iter().all(|v| (0.0..=1.0).contains(v));
        monotone &= w.iter().zip(&prev).all(|(v, p)| *v >= p - 1e-12);
        prev = w.clone();
    }
    let min = w.iter().copied().fold(f64::INFINITY, f64::min);
    let minimizers: Vec<Vec<f64>> =
        (0..grid.len()).filter(|&i| w[i] <= min + 1e-9).map(|i| grid.center(i)).collect();
    let near_corner = minimizers.iter().any(|c| {
        [(0.6, 0.6), (-0.6, 0.6)].iter().any(|(x, y)| ((c[0] - x).powi(2) + (c[1] - y).powi(2)).sqrt() <= SQUARE_CORNER_DIST)
    });
    let corner = |x: f64, y: f64| w[grid.cell_of_point(&[x, y]).unwrap()];
    let tail = tail_bound(cert.m.max(1), cert.rho, SQUARE_N).unwrap();
    let (fast, time) = within(Duration::from_secs(1200), started);
    outcome(
        sampled && m_ok && rho_ok && bounded && monotone && near_corner && fast,
        format!(
            "(a) {{g<{SQUARE_LEVEL}}} in excessive set at {} centers: {sampled}; (b) m = {} ({:?}); (c) rho = {:.4} in {:?}: {rho_ok}; \
             (d) w_{SQUARE_N} in [0,1]: {bounded}, monotone: {monotone}, min {min:.4} at {:?}, corners (0.59,0.59) {:.4} \
             (-0.59,0.59) {:.4} (0.59,-0.59) {:.4} (-0.59,-0.59) {:.4}; coarse ledger lambda {:.3} tail {tail:.3}; \
             reference arithmetic 0.02 + 0.112 + 0.1 = {:.3}; {time}",
            low.count(),
            cert.m,
            cert.status,
            cert.rho,
            SQUARE_RHO,
            minimizers,
            corner(0.59, 0.59),
            corner(-0.59, 0.59),
            corner(0.59, -0.59),
            corner(-0.59, -0.59),
            abs.lambda_on(&avoid),
            0.02 + 0.112 + 0.1,
        ),
    )
}

/// Exact satisfaction sets, listed in the order the verifier records its trace.
fn exact_sets(f: &Formula, k: &MatrixKernel, labels: &BTreeMap<String, Region>, out: &mut Vec<Region>) -> Region {
    let space = k.space();
    let r = match f {
        Formula::True => Region::full(space),
        Formula::Atom(name) => labels[name].clone(),
        Formula::Not(g) => exact_sets(g, k, labels, out).complement(),
        Formula::And(l, r) => {
            let l = exact_sets(l, k, labels, out);
            l.intersect(&exact_sets(r, k, labels, out)).unwrap()
        }
        Formula::Prob { cmp, p, path } => {
            let values: Vec<f64> = match path.as_ref() {
                PathFormula::Next(g) => {
                    let r = exact_sets(g, k, labels, out);
                    (0..k.len()).map(|i| k.transition_prob(i, &r)).collect()
                }
                PathFormula::BoundedUntil(l, r, n) => {
                    let (a, b) = (exact_sets(l, k, labels, out), exact_sets(r, k, labels, out));
                    common::naive_bounded_reach_avoid(k, &a, &b, *n)
                }
                PathFormula::Until(l, r) => {
                    let (a, b) = (exact_sets(l, k, labels, out), exact_sets(r, k, labels, out));
                    solve_reach_avoid_exact(k, &a, &b).unwrap().into_values()
                }
                // the verifier sees `true U !g`: mirror its trace entries
                PathFormula::Globally(g) | PathFormula::BoundedGlobally(g, _) => {
                    out.push(Region::full(space));
                    let a = exact_sets(g, k, labels, out);
                    out.push(a.complement());
                    match path.as_ref() {
                        PathFormula::BoundedGlobally(_, n) => common::naive_bounded_reach_avoid(
                            k,
                            &Region::full(space),
                            &a.complement(),
                            *n,
                        )
                        .into_iter()
                        .map(|v| 1.0 - v)
                        .collect(),
                        _ => solve_invariance_exact(k, &a).unwrap().into_values(),
                    }
                }
            };
            Region::from_predicate(space, |i| cmp.holds(values[i], *p))
        }
    };
    out.push(r.clone());
    r
}

fn criterion_9() -> Outcome {
    let started = Instant::now();
    let mut r = rng(9);
    let mut failures = Vec::new();
    let (mut entries, mut undecided) = (0, 0);
    for k in 0..NESTED_CHAINS {
        let n = r.random_range(2..=40);
        let chain = common::random_chain(&mut r, n);
        let labels = common::random_labels(&mut r, chain.space());
        let f = common::random_formula(&mut r, 3);
        let mut exact = Vec::new();
        exact_sets(&f, &chain, &labels, &mut exact);
        let ctx = FiniteContext::new(chain, labels).unwrap();
        let v = verify_partial(&f, &ctx, NESTED_DELTA).unwrap();
        if v.trace.len() != exact.len() || !v.is_resolved() {
            failures.push(format!("{k}: {f} trace {} oracle {} resolved {}", v.trace.len(), exact.len(), v.is_resolved()));
            continue;
        }
        for (t, e) in v.trace.iter().zip(&exact) {
            entries += 1;
            undecided += t.sets.undecided().count();
            if !t.sets.sub.is_subset(e).unwrap() || !e.is_subset(&t.sets.sup).unwrap() {
                failures.push(format!("{k}: {f} at {}", t.formula));
            }
        }
    }
    let (fast, time) = within(Duration::from_secs(120), started);
    outcome(
        failures.is_empty() && fast,
        format!("{NESTED_CHAINS} formulae, {entries} subformulae, {undecided} undecided states, failures {failures:?}, {time}"),
    )
}

fn cli(args: &[&str]) -> (i32, Vec<u8>) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = pctlmc::cli::run(args.iter().map(|s| s.to_string()), &mut out, &mut err);
    (code, out)
}

fn criterion_10() -> Outcome {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data");
    let chain = format!("{data}/chain.json");
    let decay = format!("{data}/decay1d.json");
    let runs: Vec<Vec<&str>> = vec![
        vec!["check", "--model", &chain, "--formula", "P[>=0.5](safe U goal) & !trap", "--delta", "0.001", "--emit-masks"],
        vec!["check", "--model", &decay, "--formula", "P[>=0.5](inner U<=5 right)", "--delta", "0.2"],
        vec!["simulate", "--model", &chain, "--start", "2", "--steps", "40", "--seed", "11"],
        vec!["simulate", "--model", &decay, "--start", "0.3", "--steps", "60", "--seed", "5"],
        vec![
            "simulate", "--model", &decay, "--start", "0.3", "--steps", "100", "--seed", "5", "--samples", "20000", "--safe",
            "inner", "--goal", "right",
        ],
    ];
    let mut diffs = Vec::new();
    for args in &runs {
        let mut outputs = Vec::new();
        for threads in ["1", "8"] {
            let mut full = vec!["pctlmc", "--threads", threads];
            full.extend(args.iter().copied());
            outputs.push(cli(&full));
        }
        if outputs[0] != outputs[1] || outputs[0].1.is_empty() {
            diffs.push(format!("{} {} (exit {} vs {})", args[0], args[2], outputs[0].0, outputs[1].0));
        }
    }
    outcome(diffs.is_empty(), format!("{} command lines compared at 1 and 8 threads, differing {diffs:?}", runs.len()))
}

#[test]
fn acceptance_criteria() {
    let criteria: [(usize, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (id, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let o = catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|e| outcome(false, format!("panicked: {:?}", e.downcast_ref::<String>())));
        // written to the handle, not through println!, so the lines survive output capture
        let line = format!("criterion {id}: {} {}\n", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        std::io::stdout().lock().write_all(line.as_bytes()).unwrap();
        if !o.pass {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
