//! Reach-avoid and invariance over non-simple sets: excise a neighbourhood `C` of
//! the largest absorbing subset and bound what is lost with a locally excessive
//! function.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::discretize::ErrorLedger;
use crate::engine::ValueFn;
use crate::error::{Error, Result};
use crate::horizon::{unbounded_reach_avoid_with, HorizonOptions, Sandwich};
use crate::kernel::analytic::{affine_gauss_moment, nonlinear2d_pg};
use crate::kernel::{MatrixKernel, PointKernel};
use crate::space::{Region, StateSpace};

type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A non-negative function `g`, the level `delta` below which it is claimed to be
/// excessive, and its zeros. `pg` evaluates `Pg` in closed form.
#[derive(Clone)]
pub struct ExcessiveCandidate {
    pub name: String,
    g: PointFn,
    pg: Option<PointFn>,
    pub delta: f64,
    pub zeros: Vec<Vec<f64>>,
}

impl fmt::Debug for ExcessiveCandidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExcessiveCandidate")
            .field("name", &self.name)
            .field("delta", &self.delta)
            .field("zeros", &self.zeros)
            .finish()
    }
}

impl ExcessiveCandidate {
    pub fn new(
        name: &str,
        g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        pg: Option<PointFn>,
        delta: f64,
        zeros: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidArgument(format!("level delta must be positive, got {delta}")));
        }
        Ok(ExcessiveCandidate { name: name.to_string(), g: Arc::new(g), pg, delta, zeros })
    }

    /// `g(x) = x1^2 + x2^2` with `Pg` from the 2D model.
    pub fn norm_squared_2d(delta: f64) -> Result<Self> {
        Self::new(
            "norm_squared",
            |x| x[0] * x[0] + x[1] * x[1],
            Some(Arc::new(|x: &[f64]| nonlinear2d_pg(x[0], x[1]))),
            delta,
            vec![vec![0.0, 0.0]],
        )
    }

    /// `g(x) = |x|^q`; under the 1D affine model `Pg = b(q) g`.
    pub fn abs_power_1d(mu: f64, sigma: f64, q: f64, delta: f64) -> Result<Self> {
        if !(q > 0.0) {
            return Err(Error::InvalidArgument(format!("power must be positive, got {q}")));
        }
        let b = affine_gauss_moment(mu, sigma, q)?;
        Self::new(
            &format!("abs_power(q={q})"),
            move |x| x[0].abs().powf(q),
            Some(Arc::new(move |x: &[f64]| b * x[0].abs().powf(q))),
            delta,
            vec![vec![0.0]],
        )
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidArgument(format!("level delta must be positive, got {delta}")));
        }
        Ok(ExcessiveCandidate { delta, ..self.clone() })
    }

    pub fn g(&self, x: &[f64]) -> f64 {
        (self.g)(x)
    }

    pub fn pg(&self, x: &[f64]) -> Option<f64> {
        self.pg.as_ref().map(|f| f(x))
    }
}

/// Cells of `sample` whose center satisfies `Pg - g <= 0`.
pub fn excessive_set(cand: &ExcessiveCandidate, sample: &Region) -> Result<Region> {
    let space = sample.space();
    let mut mask = vec![false; space.len()];
    for i in sample.indices() {
        let x = space.center(i);
        let g = cand.g(&x);
        if g < 0.0 {
            return Err(Error::NegativeCandidate { point: x, value: g });
        }
        let pg = cand
            .pg(&x)
            .ok_or_else(|| Error::InvalidArgument(format!("candidate {} has no closed-form Pg", cand.name)))?;
        mask[i] = pg - g <= 0.0;
    }
    Region::from_mask(space, mask)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    /// Holds at every sampled point. Sampling cannot prove a claim on a continuum.
    NumericallyVerified,
    Failed,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExcessivityReport {
    pub candidate: String,
    pub delta: f64,
    pub checks: Vec<Check>,
}

impl ExcessivityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status == CheckStatus::NumericallyVerified)
    }

    pub fn status(&self) -> CheckStatus {
        if self.passed() {
            CheckStatus::NumericallyVerified
        } else {
            CheckStatus::Failed
        }
    }
}

fn check(name: &'static str, failures: Vec<String>) -> Check {
    match failures.first() {
        None => Check { name, status: CheckStatus::NumericallyVerified, detail: String::new() },
        Some(first) => Check {
            name,
            status: CheckStatus::Failed,
            detail: format!("{} failing point(s), first: {first}", failures.len()),
        },
    }
}

/// Lattice with the grid spacing over the grid box scaled by 3 about its center.
fn extended_lattice(space: &StateSpace) -> Result<Vec<Vec<f64>>> {
    let axes = space.axes()?;
    let ticks: Vec<Vec<f64>> = axes
        .iter()
        .map(|a| {
            let n = 3 * a.cells;
            let lo = a.lo - a.width() * a.cells as f64;
            (0..n).map(|k| lo + a.width() * (k as f64 + 0.5)).collect()
        })
        .collect();
    Ok(match ticks.len() {
        1 => ticks[0].iter().map(|&x| vec![x]).collect(),
        _ => ticks[1].iter().flat_map(|&y| ticks[0].iter().map(move |&x| vec![x, y])).collect(),
    })
}

/// Checks at sample resolution that (a) `{g < delta}` lies in `A`, (b) `{g < delta}`
/// lies in the excessive set, and (c) the zeros of `g` are the absorbing points and
/// fill exactly the cells of `las`.
pub fn verify_local_excessivity(
    kernel: &dyn PointKernel,
    cand: &ExcessiveCandidate,
    a: &Region,
    las: &Region,
) -> Result<ExcessivityReport> {
    let space = a.space();
    let mut outside = Vec::new();
    for x in extended_lattice(space)? {
        let g = cand.g(&x);
        if g < 0.0 {
            return Err(Error::NegativeCandidate { point: x, value: g });
        }
        if g < cand.delta && !space.cell_of_point(&x).is_some_and(|i| a.contains(i)) {
            outside.push(format!("{x:?} (g = {g})"));
        }
    }
    let mut not_excessive = Vec::new();
    for i in 0..space.len() {
        let x = space.center(i);
        let g = cand.g(&x);
        if g < cand.delta {
            let pg = cand
                .pg(&x)
                .ok_or_else(|| Error::InvalidArgument(format!("candidate {} has no closed-form Pg", cand.name)))?;
            if pg - g > 0.0 {
                not_excessive.push(format!("{x:?} (Pg - g = {})", pg - g));
            }
        }
    }
    let mut zeros = Vec::new();
    let absorbing = kernel.absorbing_points();
    for z in &cand.zeros {
        if cand.g(z) != 0.0 {
            zeros.push(format!("g({z:?}) = {}", cand.g(z)));
        }
        if !absorbing.contains(z) {
            zeros.push(format!("zero {z:?} is not an absorbing point"));
        }
    }
    let zero_cells = Region::from_indices(space, cand.zeros.iter().filter_map(|z| space.cell_of_point(z)))?;
    if zero_cells != *las {
        zeros.push(format!(
            "zero cells {:?} differ from the absorbing candidate {:?}",
            zero_cells.indices().collect::<Vec<_>>(),
            las.indices().collect::<Vec<_>>()
        ));
    }
    for i in (0..space.len()).filter(|&i| !zero_cells.contains(i)) {
        let x = space.center(i);
        if !(cand.g(&x) > 0.0) {
            zeros.push(format!("g vanishes at {x:?}"));
            break;
        }
    }
    Ok(ExcessivityReport {
        candidate: cand.name.clone(),
        delta: cand.delta,
        checks: vec![
            check("sublevel_set_inside_region", outside),
            check("sublevel_set_excessive", not_excessive),
            check("zero_set_is_absorbing", zeros),
        ],
    })
}

/// Largest `delta` with `{g < delta}` inside `A` at sample resolution: the minimum
/// of `g` over the extended lattice points that fall outside `A`.
pub fn largest_level(cand: &ExcessiveCandidate, a: &Region) -> Result<f64> {
    let space = a.space();
    let mut level = f64::INFINITY;
    for x in extended_lattice(space)? {
        if !space.cell_of_point(&x).is_some_and(|i| a.contains(i)) {
            level = level.min(cand.g(&x));
        }
    }
    Ok(level)
}

/// Smallest `g` over cell centers where `Pg - g > 0`: below it the sampled
/// excessivity check holds.
pub fn excessive_level(cand: &ExcessiveCandidate, space: &StateSpace) -> Result<f64> {
    let mut level = f64::INFINITY;
    for i in 0..space.len() {
        let x = space.center(i);
        let g = cand.g(&x);
        let pg = cand
            .pg(&x)
            .ok_or_else(|| Error::InvalidArgument(format!("candidate {} has no closed-form Pg", cand.name)))?;
        if pg - g > 0.0 {
            level = level.min(g);
        }
    }
    Ok(level)
}

/// Cells lying entirely in `{g < level}`, judged by their corners; exact when the
/// sublevel sets of `g` are convex. Rounding inwards keeps `g < level` on all of `C`.
pub fn excision_region(space: &Arc<StateSpace>, cand: &ExcessiveCandidate, level: f64) -> Region {
    Region::from_predicate(space, |i| space.cell_corners(i).iter().all(|c| cand.g(c) < level))
}

/// Lower bound `1 - g(x)/delta` on staying in `{g < delta}` forever.
pub fn doob_lower_bound(cand: &ExcessiveCandidate, report: &ExcessivityReport, x: &[f64]) -> Result<f64> {
    if !report.passed() || report.candidate != cand.name || report.delta < cand.delta {
        return Err(Error::UnverifiedCandidate);
    }
    Ok((1.0 - cand.g(x) / cand.delta).max(0.0))
}

/// Power `q` in `(0, 4]` minimising `b(q) = E|mu + sigma xi|^q`, by golden-section
/// search; fails unless `b(q) < 1 - 1e-3`, i.e. unless `|x|^q` is excessive.
pub fn find_power(mu: f64, sigma: f64) -> Result<(f64, f64)> {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let b = |q: f64| affine_gauss_moment(mu, sigma, q);
    let (mut lo, mut hi) = (1e-6, 4.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (b(x1)?, b(x2)?);
    while hi - lo > 1e-5 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = b(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = b(x2)?;
        }
    }
    let (q, bq) = if f1 < f2 { (x1, f1) } else { (x2, f2) };
    if bq < 1.0 - 1e-3 {
        Ok((q, bq))
    } else {
        Err(Error::Inconclusive(format!(
            "no power |x|^q with q in (0,4] is excessive for mu = {mu}, sigma = {sigma} (min b(q) = {bq})"
        )))
    }
}

#[derive(Clone, Debug)]
pub struct DecompositionResult {
    /// Certified bounds on `w(.; A \ C, B)`.
    pub value: Sandwich,
    pub lower: ValueFn,
    pub upper: ValueFn,
    pub excision: Region,
    /// Bound on what the excision can lose; 1 when no claim was supplied.
    pub excision_error: f64,
    pub ledger: ErrorLedger,
    /// The excised set rests on a candidate that was not proved absorbing-complete.
    pub conditional: bool,
}

/// `w(.; A, B)` from `w(.; A \ C, B)` and the caller's bound `eps_claim` on
/// `sup_C w(.; A, B)`.
pub fn decompose_reach_avoid(
    kernel: &MatrixKernel,
    a: &Region,
    b: &Region,
    c: &Region,
    eps_claim: Option<f64>,
    opts: HorizonOptions,
) -> Result<DecompositionResult> {
    let a = a.difference(b)?;
    if !c.is_subset(&a)? {
        return Err(Error::InvalidArgument("excised set must lie inside A \\ B".into()));
    }
    let value = unbounded_reach_avoid_with(kernel, &a.difference(c)?, b, opts)?;
    let excision_error = eps_claim.unwrap_or(1.0).clamp(0.0, 1.0);
    let upper = value.upper.map(|v| v + excision_error);
    let ledger = ErrorLedger::compose(value.discretization, value.cert.tail, excision_error);
    Ok(DecompositionResult {
        lower: value.lower.clone(),
        upper,
        value,
        excision: c.clone(),
        excision_error,
        ledger,
        conditional: false,
    })
}

/// `u(.; A)` through `w(.; A \ C, C)`: paths staying in `A` forever must enter `C`
/// once `A \ C` is certified simple, and from `C` they stay forever with probability
/// at least `1 - eps_claim`. Hence `w - eps_claim <= u <= w`.
pub fn decompose_invariance(
    kernel: &MatrixKernel,
    a: &Region,
    c: &Region,
    eps_claim: Option<f64>,
    opts: HorizonOptions,
) -> Result<DecompositionResult> {
    if !c.is_subset(a)? {
        return Err(Error::InvalidArgument("excised set must lie inside A".into()));
    }
    let value = unbounded_reach_avoid_with(kernel, a, c, opts)?;
    let excision_error = eps_claim.unwrap_or(1.0).clamp(0.0, 1.0);
    let lower = value.lower.map(|v| v - excision_error);
    let ledger = ErrorLedger::compose(value.discretization, value.cert.tail, excision_error);
    Ok(DecompositionResult {
        upper: value.upper.clone(),
        lower,
        value,
        excision: c.clone(),
        excision_error,
        ledger,
        conditional: false,
    })
}
