//! Trajectory simulation and hitting-event frequencies.
//!
//! Path `i` of a run with seed `s` draws from ChaCha8 keyed by `s` on stream `i`, so
//! results do not depend on how paths are spread over threads.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{MatrixKernel, PointKernel};
use crate::space::{Region, StateSpace};

/// What gets simulated. Chain states are encoded as one-coordinate points `[i]`.
#[derive(Clone, Copy)]
pub enum Simulator<'a> {
    Chain(&'a MatrixKernel),
    Point { kernel: &'a dyn PointKernel, grid: &'a Arc<StateSpace> },
}

impl<'a> Simulator<'a> {
    pub fn space(&self) -> &Arc<StateSpace> {
        match self {
            Simulator::Chain(k) => k.space(),
            Simulator::Point { grid, .. } => grid,
        }
    }

    fn check_start(&self, x0: &[f64]) -> Result<()> {
        match self {
            Simulator::Chain(k) => {
                if x0.len() != 1 || x0[0] < 0.0 || x0[0].fract() != 0.0 || x0[0] as usize >= k.len() {
                    return Err(Error::InvalidArgument(format!("{x0:?} is not a state of the chain")));
                }
            }
            Simulator::Point { kernel, .. } => {
                if x0.len() != kernel.dim() {
                    return Err(Error::DimensionMismatch { expected: kernel.dim(), got: x0.len() });
                }
            }
        }
        Ok(())
    }

    /// Index of the state or cell holding `x`; `None` off the grid.
    pub fn cell(&self, x: &[f64]) -> Option<usize> {
        match self {
            Simulator::Chain(_) => Some(x[0] as usize),
            Simulator::Point { grid, .. } => grid.cell_of_point(x),
        }
    }

    /// `x` never moves again.
    fn is_fixed(&self, x: &[f64]) -> bool {
        match self {
            Simulator::Chain(k) => k.prob(x[0] as usize, x[0] as usize) == 1.0,
            Simulator::Point { kernel, .. } => kernel.absorbing_points().iter().any(|p| p.as_slice() == x),
        }
    }

    fn step(&self, x: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        match self {
            Simulator::Chain(k) => {
                let i = x[0] as usize;
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut last = i;
                for (j, p) in k.row(i) {
                    acc += p;
                    last = j;
                    if u < acc {
                        return vec![j as f64];
                    }
                }
                // rounding left u above the row total
                vec![last as f64]
            }
            Simulator::Point { kernel, .. } => kernel.sample(x, rng),
        }
    }
}

fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A sampled trajectory with cached hitting times.
#[derive(Clone, Debug)]
pub struct Path {
    points: Vec<Vec<f64>>,
    cells: Vec<Option<usize>>,
    hits: HashMap<Vec<bool>, Option<usize>>,
}

impl Path {
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn cells(&self) -> &[Option<usize>] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// First index with the state in `r`, `None` if the path never enters it.
    pub fn hitting_time(&mut self, r: &Region) -> Option<usize> {
        let cells = &self.cells;
        *self
            .hits
            .entry(r.mask().to_vec())
            .or_insert_with(|| cells.iter().position(|c| c.is_some_and(|i| r.contains(i))))
    }

    /// Writes `step,x1[,x2],cell`; off-grid points have an empty cell column.
    pub fn write_csv(&self, out: &mut dyn std::io::Write) -> std::io::Result<()> {
        let dim = self.points.first().map_or(1, Vec::len);
        let header: Vec<String> = (1..=dim).map(|d| format!("x{d}")).collect();
        writeln!(out, "step,{},cell", header.join(","))?;
        for (k, (p, c)) in self.points.iter().zip(&self.cells).enumerate() {
            let coords: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
            let cell = c.map(|i| i.to_string()).unwrap_or_default();
            writeln!(out, "{k},{},{cell}", coords.join(","))?;
        }
        Ok(())
    }
}

/// `steps` transitions from `x0`; the path holds `steps + 1` states.
pub fn simulate(sim: Simulator<'_>, x0: &[f64], steps: usize, seed: u64) -> Result<Path> {
    sim.check_start(x0)?;
    let mut rng = path_rng(seed, 0);
    let mut points = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    for k in 0..=steps {
        points.push(x.clone());
        if k < steps {
            x = if sim.is_fixed(&x) { x } else { sim.step(&x, &mut rng) };
        }
    }
    let cells = points.iter().map(|p| sim.cell(p)).collect();
    Ok(Path { points, cells, hits: HashMap::new() })
}

/// Finite horizon, or a cutoff for an unbounded event together with a bound on the
/// probability that the event is decided after the cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Bounded(usize),
    Unbounded { cutoff: usize, tail: f64 },
}

impl Horizon {
    fn steps(&self) -> usize {
        match *self {
            Horizon::Bounded(n) => n,
            Horizon::Unbounded { cutoff, .. } => cutoff,
        }
    }

    fn tail(&self) -> f64 {
        match *self {
            Horizon::Bounded(_) => 0.0,
            Horizon::Unbounded { tail, .. } => tail.clamp(0.0, 1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    ReachAvoid,
    Invariance,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    /// 95% normal-approximation half-width `1.96 sqrt(mean (1 - mean) / samples)`.
    pub half_width: f64,
    pub samples: usize,
    pub seed: u64,
    pub successes: usize,
    /// Paths still undecided at the cutoff.
    pub undecided: usize,
    /// Widening for an unbounded event: added above for reach-avoid, below for invariance.
    pub tail: f64,
    #[serde(skip)]
    invariance: bool,
}

impl Estimate {
    fn new(successes: usize, undecided: usize, samples: usize, seed: u64, tail: f64, kind: Kind) -> Self {
        let mean = successes as f64 / samples as f64;
        Estimate {
            mean,
            half_width: 1.96 * (mean * (1.0 - mean) / samples as f64).sqrt(),
            samples,
            seed,
            successes,
            undecided,
            tail,
            invariance: kind == Kind::Invariance,
        }
    }

    /// Normal-approximation half-width for quantile `z`.
    pub fn half_width_at(&self, z: f64) -> f64 {
        z * (self.mean * (1.0 - self.mean) / self.samples as f64).sqrt()
    }

    pub fn lower(&self) -> f64 {
        self.lower_at(1.96)
    }

    pub fn upper(&self) -> f64 {
        self.upper_at(1.96)
    }

    pub fn lower_at(&self, z: f64) -> f64 {
        let tail = if self.invariance { self.tail } else { 0.0 };
        (self.mean - self.half_width_at(z) - tail).max(0.0)
    }

    pub fn upper_at(&self, z: f64) -> f64 {
        let tail = if self.invariance { 0.0 } else { self.tail };
        (self.mean + self.half_width_at(z) + tail).min(1.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Success,
    Failure,
    Undecided,
}

fn run_event(sim: Simulator<'_>, x0: &[f64], a: &Region, b: Option<&Region>, horizon: Horizon, rng: &mut ChaCha8Rng) -> Outcome {
    let n = horizon.steps();
    let bounded = matches!(horizon, Horizon::Bounded(_));
    let mut x = x0.to_vec();
    for k in 0..=n {
        let cell = sim.cell(&x);
        match b {
            Some(b) => {
                if cell.is_some_and(|i| b.contains(i)) {
                    return Outcome::Success;
                }
                if !cell.is_some_and(|i| a.contains(i)) || sim.is_fixed(&x) {
                    return Outcome::Failure;
                }
            }
            None => {
                if !cell.is_some_and(|i| a.contains(i)) {
                    return Outcome::Failure;
                }
                if sim.is_fixed(&x) {
                    return Outcome::Success;
                }
            }
        }
        if k == n {
            break;
        }
        x = sim.step(&x, rng);
    }
    match (bounded, b.is_some()) {
        (true, true) => Outcome::Failure,
        (true, false) => Outcome::Success,
        (false, _) => Outcome::Undecided,
    }
}

fn estimate(
    sim: Simulator<'_>,
    x0: &[f64],
    a: &Region,
    b: Option<&Region>,
    horizon: Horizon,
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    sim.check_start(x0)?;
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if **a.space() != **sim.space() || b.is_some_and(|b| **b.space() != **sim.space()) {
        return Err(Error::SpaceMismatch);
    }
    let kind = if b.is_some() { Kind::ReachAvoid } else { Kind::Invariance };
    let (successes, undecided) = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            match run_event(sim, x0, a, b, horizon, &mut rng) {
                Outcome::Success => (1usize, 0usize),
                Outcome::Failure => (0, 0),
                // undecided counts as failure for reach-avoid and success for invariance
                Outcome::Undecided => ((kind == Kind::Invariance) as usize, 1),
            }
        })
        .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
    Ok(Estimate::new(successes, undecided, samples, seed, horizon.tail(), kind))
}

/// Frequency of `A U<=n B` (or `A U B` truncated at the cutoff) from `x0`.
pub fn estimate_reach_avoid(
    sim: Simulator<'_>,
    x0: &[f64],
    a: &Region,
    b: &Region,
    horizon: Horizon,
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    estimate(sim, x0, a, Some(b), horizon, samples, seed)
}

/// Frequency of staying in `A` for `n` steps (or up to the cutoff).
pub fn estimate_invariance(
    sim: Simulator<'_>,
    x0: &[f64],
    a: &Region,
    horizon: Horizon,
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    estimate(sim, x0, a, None, horizon, samples, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{bounded_invariance, bounded_reach_avoid};
    use crate::kernel::DensityKernel;
    use proptest::prelude::{any, prop_assert_eq, proptest, ProptestConfig};

    fn three_state() -> MatrixKernel {
        MatrixKernel::new(vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]]).unwrap()
    }

    #[test]
    fn absorbing_origin_path() {
        let k = DensityKernel::affine_gauss_1d(0.0, 1.0).unwrap();
        let grid = Arc::new(StateSpace::grid_1d(-1.0, 1.0, 10).unwrap());
        let p = simulate(Simulator::Point { kernel: &k, grid: &grid }, &[0.0], 20, 3).unwrap();
        assert!(p.points().iter().all(|x| x == &vec![0.0]));
        assert_eq!(p.len(), 21);
    }

    #[test]
    fn deterministic_row_and_seed() {
        let k = MatrixKernel::new(vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]).unwrap();
        let mut p = simulate(Simulator::Chain(&k), &[0.0], 5, 9).unwrap();
        assert_eq!(p.cells(), &[Some(0), Some(1), Some(2), Some(0), Some(1), Some(2)]);
        let two = Region::from_indices(k.space(), [2]).unwrap();
        assert_eq!(p.hitting_time(&two), Some(2));
        assert_eq!(p.hitting_time(&Region::empty(k.space())), None);
        let n = DensityKernel::nonlinear_2d();
        let grid = Arc::new(StateSpace::grid_2d((-0.6, 0.6, 12), (-0.6, 0.6, 12)).unwrap());
        let sim = Simulator::Point { kernel: &n, grid: &grid };
        let a = simulate(sim, &[0.3, -0.2], 30, 77).unwrap();
        let b = simulate(sim, &[0.3, -0.2], 30, 77).unwrap();
        assert_eq!(a.points(), b.points());
    }

    #[test]
    fn empty_target_and_full_space() {
        let k = three_state();
        let full = Region::full(k.space());
        let e = estimate_reach_avoid(Simulator::Chain(&k), &[0.0], &full, &Region::empty(k.space()), Horizon::Bounded(5), 100, 1)
            .unwrap();
        assert_eq!(e.mean, 0.0);
        let e = estimate_invariance(Simulator::Chain(&k), &[0.0], &full, Horizon::Bounded(50), 100, 1).unwrap();
        assert_eq!(e.mean, 1.0);
    }

    #[test]
    fn three_state_reach_avoid() {
        let k = three_state();
        let a = Region::from_indices(k.space(), [0, 1]).unwrap();
        let b = Region::from_indices(k.space(), [2]).unwrap();
        let e = estimate_reach_avoid(Simulator::Chain(&k), &[0.0], &a, &b, Horizon::Bounded(2), 100_000, 5).unwrap();
        assert!(e.lower() <= 0.5 && 0.5 <= e.upper(), "{e:?}");
    }

    #[test]
    fn no_excessive_regime_escapes() {
        let k = DensityKernel::affine_gauss_1d(0.0, 2.0).unwrap();
        let grid = Arc::new(StateSpace::grid_1d(-1.0, 1.0, 64).unwrap());
        let a = Region::full(&grid);
        let h = Horizon::Unbounded { cutoff: 10_000, tail: 0.0 };
        let e = estimate_invariance(Simulator::Point { kernel: &k, grid: &grid }, &[0.5], &a, h, 20_000, 11).unwrap();
        assert!(e.lower() <= 0.0 + 1e-12 && e.mean < 0.01, "{e:?}");
    }

    #[test]
    fn decaying_regime_stays_near_origin() {
        let k = DensityKernel::affine_gauss_1d(0.0, 1.0).unwrap();
        let grid = Arc::new(StateSpace::grid_1d(-1.0, 1.0, 64).unwrap());
        let a = Region::full(&grid);
        let h = Horizon::Unbounded { cutoff: 2_000, tail: 0.0 };
        let sim = Simulator::Point { kernel: &k, grid: &grid };
        let near = estimate_invariance(sim, &[0.05], &a, h, 20_000, 4).unwrap();
        let far = estimate_invariance(sim, &[0.6], &a, h, 20_000, 4).unwrap();
        assert!(near.mean > 0.0 && far.mean < near.mean, "{near:?} {far:?}");
    }

    #[test]
    fn tail_widens_the_right_side() {
        let r = Estimate::new(50, 3, 100, 0, 0.1, Kind::ReachAvoid);
        assert!((r.upper() - (0.5 + r.half_width + 0.1)).abs() < 1e-15);
        assert!((r.lower() - (0.5 - r.half_width)).abs() < 1e-15);
        let i = Estimate::new(50, 3, 100, 0, 0.1, Kind::Invariance);
        assert!((i.lower() - (0.5 - i.half_width - 0.1)).abs() < 1e-15);
    }

    #[test]
    fn independent_of_thread_count() {
        let k = DensityKernel::nonlinear_2d();
        let grid = Arc::new(StateSpace::grid_2d((-0.6, 0.6, 20), (-0.6, 0.6, 20)).unwrap());
        let a = Region::full(&grid);
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                estimate_invariance(Simulator::Point { kernel: &k, grid: &grid }, &[0.5, 0.5], &a, Horizon::Bounded(30), 5000, 42)
                    .unwrap()
            })
        };
        assert_eq!(run(1), run(8));
    }

    fn random_chain(n: usize, rng: &mut ChaCha8Rng) -> MatrixKernel {
        let rows = (0..n)
            .map(|_| {
                let mut r: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { rng.random::<f64>() } else { 0.0 }).collect();
                r[rng.random_range(0..n)] += 0.1;
                let s: f64 = r.iter().sum();
                r.iter().map(|v| v / s).collect()
            })
            .collect();
        MatrixKernel::normalized(Arc::new(StateSpace::finite(n).unwrap()), rows).unwrap()
    }

    // DP value inside the 99% interval in at least 95 of 100 random trials
    #[test]
    fn statistically_consistent_with_dp() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut inside = 0;
        for trial in 0..100u64 {
            let n = rng.random_range(3..8);
            let k = random_chain(n, &mut rng);
            let a_mask: Vec<bool> = (0..n).map(|_| rng.random_bool(0.6)).collect();
            let b_mask: Vec<bool> = a_mask.iter().map(|&in_a| !in_a && rng.random_bool(0.5)).collect();
            let a = Region::from_mask(k.space(), a_mask).unwrap();
            let b = Region::from_mask(k.space(), b_mask).unwrap();
            let steps = rng.random_range(1..6);
            let x0 = rng.random_range(0..n);
            let (exact, est) = if trial % 2 == 0 {
                let w = bounded_reach_avoid(&k, &a, &b, steps).unwrap();
                let e = estimate_reach_avoid(Simulator::Chain(&k), &[x0 as f64], &a, &b, Horizon::Bounded(steps), 4000, trial)
                    .unwrap();
                (w.get(x0), e)
            } else {
                let u = bounded_invariance(&k, &a, steps).unwrap();
                let e = estimate_invariance(Simulator::Chain(&k), &[x0 as f64], &a, Horizon::Bounded(steps), 4000, trial)
                    .unwrap();
                (u.get(x0), e)
            };
            // a degenerate estimate has zero width and is exact when the value is 0 or 1
            if est.lower_at(2.576) - 1e-12 <= exact && exact <= est.upper_at(2.576) + 1e-12 {
                inside += 1;
            }
        }
        assert!(inside >= 95, "{inside}/100");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn same_seed_same_estimate(seed in any::<u64>(), x in 0usize..3) {
            let k = three_state();
            let a = Region::from_indices(k.space(), [0, 1]).unwrap();
            let e1 = estimate_invariance(Simulator::Chain(&k), &[x as f64], &a, Horizon::Bounded(4), 500, seed).unwrap();
            let e2 = estimate_invariance(Simulator::Chain(&k), &[x as f64], &a, Horizon::Bounded(4), 500, seed).unwrap();
            prop_assert_eq!(e1, e2);
        }
    }
}
