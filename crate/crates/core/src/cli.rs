//! Batch front end: JSON model files in, JSON reports and CSV value dumps out.
//!
//! Exit codes: 0 success, 2 bad input (files, flags, formulae), 3 a subformula or
//! query could not be decided (a partial report is still written), 4 internal error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use crate::absorbing::{las_finite, simplicity_by_support};
use crate::checker::{builtin_candidate, FiniteContext, GridContext};
use crate::discretize::{discretize, LambdaSpec};
use crate::engine::write_csv_columns;
use crate::error::Error;
use crate::formula::{desugar_invariance, parse, verify_partial, CheckerContext, Formula, PathFormula, ThreeValuedSet};
use crate::horizon::plan_horizon;
use crate::kernel::{DensityKernel, MatrixKernel, PointKernel};
use crate::montecarlo::{estimate_invariance, estimate_reach_avoid, simulate, Horizon, Simulator};
use crate::space::{region_from_box, Axis, Region, StateSpace};

#[derive(Parser, Debug)]
#[command(name = "pctlmc", version, about = "PCTL model checking for discrete-time Markov processes")]
pub struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Verify a formula and write a JSON report.
    Check(CheckArgs),
    /// Dump the value function of a probability formula as CSV `index,x1[,x2],lower,upper`.
    Value(ValueArgs),
    /// Largest absorbing subset of a labelled set, as JSON.
    Las(LasArgs),
    /// Horizon reaching a tail bound of `epsilon`, printed as `n=<horizon>`.
    Plan(PlanArgs),
    /// Sample a path (CSV) or estimate an event probability (JSON).
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long)]
    model: PathBuf,
    /// Grid resolution override: "N" or "NxM".
    #[arg(long)]
    grid: Option<String>,
}

#[derive(Args, Debug)]
struct Precision {
    /// Precision of every value-function evaluation; 0 asks for exact finite-chain solves.
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Tail budget for unbounded until (default: delta, or delta/2 on grids).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Largest m tried when certifying contraction.
    #[arg(long = "max-m")]
    max_m: Option<usize>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, conflicts_with = "property", required_unless_present = "property")]
    formula: Option<String>,
    /// File holding the formula.
    #[arg(long)]
    property: Option<PathBuf>,
    #[command(flatten)]
    precision: Precision,
    /// Include full sub/super index lists for every subformula.
    #[arg(long)]
    emit_masks: bool,
    /// Include wall-clock timings (makes the report run-dependent).
    #[arg(long)]
    timings: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValueArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// A probability formula such as "P[>=0.9](safe U<=10 goal)"; the bound is ignored.
    #[arg(long)]
    formula: String,
    #[command(flatten)]
    precision: Precision,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LasArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Label of the set to analyse.
    #[arg(long)]
    set: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlanArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    rho: f64,
    #[arg(long)]
    epsilon: f64,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Initial state index (finite models) or comma-separated point.
    #[arg(long)]
    start: String,
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Estimate instead of sampling one path: number of paths.
    #[arg(long, requires = "safe")]
    samples: Option<usize>,
    /// Label to stay in.
    #[arg(long)]
    safe: Option<String>,
    /// Label to reach; without it the invariance of `safe` is estimated.
    #[arg(long)]
    goal: Option<String>,
    /// Treat `steps` as a cutoff for the unbounded event.
    #[arg(long)]
    unbounded: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }

    fn from_core(context: &str, e: Error) -> Self {
        let code = match e {
            _ if e.is_undecidable() => 3,
            Error::Parse(_)
            | Error::UnboundAtom(_)
            | Error::InvalidArgument(_)
            | Error::InvalidSpace(_)
            | Error::BoxOutOfBounds { .. }
            | Error::DimensionMismatch { .. }
            | Error::NotStochastic { .. }
            | Error::MissingLambda
            | Error::NotAGrid
            | Error::SpaceMismatch
            | Error::NegativeCandidate { .. } => 2,
            _ => 4,
        };
        CliError { code, message: format!("{context}: {e}") }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    space: SpaceSpec,
    kernel: KernelSpec,
    #[serde(default)]
    lambda: Option<LambdaFile>,
    #[serde(default)]
    labels: BTreeMap<String, LabelSpec>,
}

fn lambda_json(l: &LambdaSpec) -> serde_json::Value {
    match *l {
        LambdaSpec::User(value) => json!({"kind": "user", "value": value}),
        LambdaSpec::Lipschitz(constant) => json!({"kind": "lipschitz", "constant": constant}),
        LambdaSpec::TotalVariation { points_per_axis } => {
            json!({"kind": "total_variation", "points_per_axis": points_per_axis})
        }
    }
}

#[derive(Deserialize, Debug)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum SpaceSpec {
    Finite { states: usize },
    Grid { axes: Vec<AxisSpec> },
}

#[derive(Deserialize, Debug, Clone, Copy)]
#[serde(deny_unknown_fields)]
struct AxisSpec {
    lo: f64,
    hi: f64,
    cells: usize,
}

#[derive(Deserialize, Debug)]
#[serde(tag = "kind", deny_unknown_fields)]
enum KernelSpec {
    #[serde(rename = "matrix")]
    Matrix { rows: Vec<Vec<f64>> },
    #[serde(rename = "affine_gauss_1d")]
    AffineGauss1D { mu: f64, sigma: f64 },
    #[serde(rename = "nonlinear_2d")]
    Nonlinear2D,
}

#[derive(Deserialize, Debug, Clone, Copy)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum LambdaFile {
    User {
        value: f64,
    },
    Lipschitz {
        constant: f64,
    },
    TotalVariation {
        #[serde(default = "default_points")]
        points_per_axis: usize,
    },
}

fn default_points() -> usize {
    5
}

#[derive(Deserialize, Debug)]
#[serde(untagged)]
enum LabelSpec {
    States { states: Vec<usize> },
    Boxes { boxes: Vec<Vec<[f64; 2]>> },
}

enum Model {
    Chain { kernel: MatrixKernel, labels: BTreeMap<String, Region> },
    Grid { kernel: DensityKernel, grid: Arc<StateSpace>, lambda: LambdaSpec, labels: BTreeMap<String, Region> },
}

impl Model {
    fn space(&self) -> &Arc<StateSpace> {
        match self {
            Model::Chain { kernel, .. } => kernel.space(),
            Model::Grid { grid, .. } => grid,
        }
    }

    fn labels(&self) -> &BTreeMap<String, Region> {
        match self {
            Model::Chain { labels, .. } | Model::Grid { labels, .. } => labels,
        }
    }

    fn label(&self, name: &str) -> CliResult<Region> {
        if name == "true" {
            return Ok(Region::full(self.space()));
        }
        self.labels().get(name).cloned().ok_or_else(|| CliError::input(format!("--set/--safe/--goal: no label named {name:?}")))
    }
}

fn parse_grid(s: &str) -> CliResult<Vec<usize>> {
    s.split('x')
        .map(|p| p.trim().parse::<usize>().map_err(|_| CliError::input(format!("--grid: cannot parse {s:?} as N or NxM"))))
        .collect()
}

fn load_model(args: &ModelArgs) -> CliResult<Model> {
    let path = &args.model;
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| {
        CliError::input(format!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column()))
    })?;
    let ctx = |what: &str| format!("{}: {what}", path.display());
    let space = match &file.space {
        SpaceSpec::Finite { states } => {
            if args.grid.is_some() {
                return Err(CliError::input("--grid: the model has a finite state space"));
            }
            StateSpace::finite(*states).map_err(|e| CliError::from_core(&ctx("space"), e))?
        }
        SpaceSpec::Grid { axes } => {
            let mut axes = axes.clone();
            if let Some(g) = &args.grid {
                let cells = parse_grid(g)?;
                if cells.len() != axes.len() {
                    return Err(CliError::input(format!("--grid: {} resolutions for {} axes", cells.len(), axes.len())));
                }
                for (a, c) in axes.iter_mut().zip(cells) {
                    a.cells = c;
                }
            }
            let axes = axes
                .iter()
                .map(|a| Axis::new(a.lo, a.hi, a.cells))
                .collect::<crate::Result<Vec<_>>>()
                .map_err(|e| CliError::from_core(&ctx("space"), e))?;
            StateSpace::grid(axes).map_err(|e| CliError::from_core(&ctx("space"), e))?
        }
    };
    let space = Arc::new(space);
    let mut labels = BTreeMap::new();
    for (name, spec) in &file.labels {
        let what = ctx(&format!("label {name:?}"));
        let r = match spec {
            LabelSpec::States { states } => Region::from_indices(&space, states.iter().copied()),
            LabelSpec::Boxes { boxes } => boxes.iter().try_fold(Region::empty(&space), |acc, b| {
                let bx: Vec<(f64, f64)> = b.iter().map(|p| (p[0], p[1])).collect();
                acc.union(&region_from_box(&space, &bx)?)
            }),
        }
        .map_err(|e| CliError::from_core(&what, e))?;
        labels.insert(name.clone(), r);
    }
    match file.kernel {
        KernelSpec::Matrix { rows } => {
            let kernel = MatrixKernel::with_space(space, rows).map_err(|e| CliError::from_core(&ctx("kernel"), e))?;
            Ok(Model::Chain { kernel, labels })
        }
        spec => {
            if !space.is_grid() {
                return Err(CliError::input(ctx("density kernels need a grid space")));
            }
            let kernel = match spec {
                KernelSpec::AffineGauss1D { mu, sigma } => DensityKernel::affine_gauss_1d(mu, sigma),
                _ => Ok(DensityKernel::nonlinear_2d()),
            }
            .map_err(|e| CliError::from_core(&ctx("kernel"), e))?;
            if kernel.dim() != space.dim() {
                return Err(CliError::input(ctx(&format!("kernel is {}-dimensional, grid is {}", kernel.dim(), space.dim()))));
            }
            let lambda = match file.lambda {
                Some(LambdaFile::User { value }) => LambdaSpec::User(value),
                Some(LambdaFile::Lipschitz { constant }) => LambdaSpec::Lipschitz(constant),
                Some(LambdaFile::TotalVariation { points_per_axis }) => LambdaSpec::TotalVariation { points_per_axis },
                None => LambdaSpec::total_variation(),
            };
            Ok(Model::Grid { kernel, grid: space, lambda, labels })
        }
    }
}

/// The checker context with its label map, plus the grid when regions live on a chain
/// with a trailing sink state.
fn context(model: &Model, p: &Precision) -> CliResult<(Box<dyn CheckerContext>, Option<Arc<StateSpace>>)> {
    match model {
        Model::Chain { kernel, labels } => {
            let mut c = FiniteContext::new(kernel.clone(), labels.clone()).map_err(|e| CliError::from_core("model", e))?;
            c.epsilon = p.epsilon;
            c.m_max = p.max_m;
            Ok((Box::new(c), None))
        }
        Model::Grid { kernel, grid, lambda, labels } => {
            let abs = discretize(kernel, grid.clone(), Some(*lambda)).map_err(|e| CliError::from_core("discretize", e))?;
            let mut c = GridContext::new(abs, Arc::new(*kernel), labels.clone())
                .map_err(|e| CliError::from_core("model", e))?
                .with_candidate(builtin_candidate(kernel));
            c.epsilon = p.epsilon;
            c.m_max = p.max_m;
            Ok((Box::new(c), Some(grid.clone())))
        }
    }
}

fn read_formula(formula: &Option<String>, property: &Option<PathBuf>) -> CliResult<(String, Formula)> {
    let (text, origin) = match (formula, property) {
        (Some(f), _) => (f.clone(), "--formula".to_string()),
        (None, Some(p)) => (
            fs::read_to_string(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?.trim().to_string(),
            p.display().to_string(),
        ),
        (None, None) => return Err(CliError::input("one of --formula or --property is required")),
    };
    let f = parse(&text).map_err(|e| CliError::input(format!("{origin}: {e}")))?;
    Ok((text, f))
}

fn check_delta(p: &Precision) -> CliResult<()> {
    if !(0.0..1.0).contains(&p.delta) {
        return Err(CliError::input(format!("--delta: must lie in [0,1), got {}", p.delta)));
    }
    if let Some(e) = p.epsilon {
        if !(e > 0.0 && e < 1.0) {
            return Err(CliError::input(format!("--epsilon: must lie in (0,1), got {e}")));
        }
    }
    Ok(())
}

fn restrict(r: &Region, grid: &Option<Arc<StateSpace>>) -> Vec<usize> {
    let n = grid.as_ref().map_or(r.len(), |g| g.len());
    r.indices().filter(|&i| i < n).collect()
}

fn sets_json(s: &ThreeValuedSet, grid: &Option<Arc<StateSpace>>, masks: bool) -> serde_json::Value {
    let (sub, sup) = (restrict(&s.sub, grid), restrict(&s.sup, grid));
    let mut v = json!({"sub_count": sub.len(), "super_count": sup.len()});
    if masks {
        v["sub"] = json!(sub);
        v["super"] = json!(sup);
    }
    v
}

fn cmd_check(a: &CheckArgs) -> CliResult<(Vec<u8>, i32)> {
    check_delta(&a.precision)?;
    let (text, formula) = read_formula(&a.formula, &a.property)?;
    let model = load_model(&a.model)?;
    let t0 = Instant::now();
    let (ctx, grid) = context(&model, &a.precision)?;
    let t_model = t0.elapsed();
    let v = verify_partial(&formula, ctx.as_ref(), a.precision.delta).map_err(|e| CliError::from_core("check", e))?;
    let t_verify = t0.elapsed() - t_model;
    let trace: Vec<serde_json::Value> = v
        .trace
        .iter()
        .map(|t| {
            let mut e = serde_json::to_value(t).expect("trace entries serialize");
            let s = sets_json(&t.sets, &grid, a.emit_masks);
            for k in ["sub_count", "super_count", "sub", "super"] {
                if let Some(x) = s.get(k) {
                    e[k] = x.clone();
                }
            }
            e
        })
        .collect();
    let resolved = v.is_resolved();
    let mut report = json!({
        "formula": text,
        "evaluated": desugar_invariance(&formula).to_string(),
        "delta": a.precision.delta,
        "model": {
            "kind": if grid.is_some() { "grid" } else { "finite" },
            "states": model.space().len(),
        },
        "status": if resolved { "ok" } else { "inconclusive" },
        "result": sets_json(&v.sets, &grid, a.emit_masks),
        "trace": trace,
    });
    if let Model::Grid { lambda, .. } = &model {
        report["model"]["lambda"] = lambda_json(lambda);
    }
    if a.timings {
        report["timings_ms"] = json!({
            "model": t_model.as_secs_f64() * 1e3,
            "verify": t_verify.as_secs_f64() * 1e3,
        });
    }
    let mut out = serde_json::to_vec_pretty(&report).expect("report serializes");
    out.push(b'\n');
    Ok((out, if resolved { 0 } else { 3 }))
}

fn cmd_value(a: &ValueArgs) -> CliResult<Vec<u8>> {
    check_delta(&a.precision)?;
    let formula = parse(&a.formula).map_err(|e| CliError::input(format!("--formula: {e}")))?;
    let Formula::Prob { path, .. } = &formula else {
        return Err(CliError::input("--formula: expected a probability formula P[..](...)"));
    };
    let invariance = matches!(path.as_ref(), PathFormula::Globally(_) | PathFormula::BoundedGlobally(..));
    let Formula::Prob { path, .. } = desugar_invariance(&formula) else { unreachable!("desugaring keeps the root") };
    let model = load_model(&a.model)?;
    let (ctx, grid) = context(&model, &a.precision)?;
    let delta = a.precision.delta;
    let eval = |f: &Formula| -> CliResult<ThreeValuedSet> {
        verify_partial(f, ctx.as_ref(), delta).map(|v| v.sets).map_err(|e| CliError::from_core("value", e))
    };
    let core = |e| CliError::from_core("value", e);
    let (lo, hi) = match path.as_ref() {
        PathFormula::Next(g) => {
            let s = eval(g)?;
            (ctx.next_prob(&s.sub, delta).map_err(core)?, ctx.next_prob(&s.sup, delta).map_err(core)?)
        }
        PathFormula::BoundedUntil(l, r, n) => {
            let (sl, sr) = (eval(l)?, eval(r)?);
            (
                ctx.bounded_until(&sl.sub, &sr.sub, *n, delta).map_err(core)?,
                ctx.bounded_until(&sl.sup, &sr.sup, *n, delta).map_err(core)?,
            )
        }
        PathFormula::Until(l, r) => {
            let (sl, sr) = (eval(l)?, eval(r)?);
            (ctx.until(&sl.sub, &sr.sub, delta).map_err(core)?, ctx.until(&sl.sup, &sr.sup, delta).map_err(core)?)
        }
        _ => unreachable!("invariance is desugared"),
    };
    let err = |a: &crate::formula::Approx, i: usize| a.cell_error.as_ref().map_or(a.error, |e| e[i]);
    let bounds = |i: usize| {
        let l = (lo.values.get(i) - err(&lo, i)).clamp(0.0, 1.0);
        let u = (hi.values.get(i) + err(&hi, i)).clamp(0.0, 1.0);
        if invariance {
            vec![1.0 - u, 1.0 - l]
        } else {
            vec![l, u]
        }
    };
    let space = grid.unwrap_or_else(|| model.space().clone());
    let mut out = Vec::new();
    write_csv_columns(&mut out, &space, &["lower", "upper"], bounds).map_err(|e| CliError { code: 4, message: e.to_string() })?;
    Ok(out)
}

fn cmd_las(a: &LasArgs) -> CliResult<Vec<u8>> {
    let model = load_model(&a.model)?;
    let set = model.label(&a.set)?;
    let report = match &model {
        Model::Chain { kernel, .. } => las_finite(kernel, &set),
        Model::Grid { kernel, .. } => simplicity_by_support(kernel, &set).map_err(|e| CliError::from_core("las", e))?,
    };
    let mut out = serde_json::to_vec_pretty(&json!({
        "set": a.set,
        "las": report.las,
        "verdict": report.verdict,
        "iterations": report.iterations,
    }))
    .expect("report serializes");
    out.push(b'\n');
    Ok(out)
}

fn cmd_plan(a: &PlanArgs) -> CliResult<Vec<u8>> {
    let n = plan_horizon(a.m, a.rho, a.epsilon).map_err(|e| CliError::from_core("plan", e))?;
    Ok(format!("n={n}\n").into_bytes())
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult<Vec<u8>> {
    let model = load_model(&a.model)?;
    let x0: Vec<f64> = a
        .start
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::input(format!("--start: cannot parse {:?}", a.start))))
        .collect::<CliResult<_>>()?;
    let grid_space;
    let sim = match &model {
        Model::Chain { kernel, .. } => Simulator::Chain(kernel),
        Model::Grid { kernel, grid, .. } => {
            grid_space = grid.clone();
            Simulator::Point { kernel, grid: &grid_space }
        }
    };
    let core = |e| CliError::from_core("simulate", e);
    let Some(samples) = a.samples else {
        let path = simulate(sim, &x0, a.steps, a.seed).map_err(core)?;
        let mut out = Vec::new();
        path.write_csv(&mut out).map_err(|e| CliError { code: 4, message: e.to_string() })?;
        return Ok(out);
    };
    let safe = model.label(a.safe.as_deref().expect("clap requires --safe with --samples"))?;
    let horizon = if a.unbounded { Horizon::Unbounded { cutoff: a.steps, tail: 0.0 } } else { Horizon::Bounded(a.steps) };
    let est = match &a.goal {
        Some(g) => estimate_reach_avoid(sim, &x0, &safe, &model.label(g)?, horizon, samples, a.seed),
        None => estimate_invariance(sim, &x0, &safe, horizon, samples, a.seed),
    }
    .map_err(core)?;
    let mut out = serde_json::to_vec_pretty(&json!({
        "estimate": est,
        "lower": est.lower(),
        "upper": est.upper(),
        "horizon": horizon,
    }))
    .expect("estimate serializes");
    out.push(b'\n');
    Ok(out)
}

fn write_output(out: &Option<PathBuf>, bytes: &[u8], stdout: &mut dyn Write) -> CliResult<()> {
    match out {
        Some(p) => write_file(p, bytes),
        None => stdout.write_all(bytes).map_err(|e| CliError { code: 4, message: format!("stdout: {e}") }),
    }
}

fn write_file(p: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(p, bytes).map_err(|e| CliError::input(format!("--out {}: {e}", p.display())))
}

/// Output bytes, their destination and the exit code.
fn dispatch(cli: &Cli) -> CliResult<(Vec<u8>, Option<PathBuf>, i32)> {
    Ok(match &cli.command {
        Command::Check(a) => {
            let (bytes, code) = cmd_check(a)?;
            (bytes, a.out.clone(), code)
        }
        Command::Value(a) => (cmd_value(a)?, a.out.clone(), 0),
        Command::Las(a) => (cmd_las(a)?, a.out.clone(), 0),
        Command::Plan(a) => (cmd_plan(a)?, None, 0),
        Command::Simulate(a) => (cmd_simulate(a)?, a.out.clone(), 0),
    })
}

/// Runs the command line `args` (program name first), writing results to `stdout`
/// and diagnostics to `stderr`; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 { write!(stdout, "{e}") } else { write!(stderr, "{e}") };
            return code;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            let _ = writeln!(stderr, "--threads: must be at least 1");
            return 2;
        }
        builder = builder.num_threads(t);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "--threads: {e}");
            return 4;
        }
    };
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| pool.install(|| dispatch(&cli))));
    let result = match result {
        Ok(Ok((bytes, out, code))) => write_output(&out, &bytes, stdout).map(|_| code),
        Ok(Err(e)) => Err(e),
        Err(_) => {
            let _ = writeln!(stderr, "error: internal failure");
            return 4;
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}
