//! Checker contexts: value-function oracles for finite chains and grid abstractions.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::json;

use crate::absorbing::{las_finite, simplicity_by_support, Verdict};
use crate::decompose::{
    decompose_reach_avoid, excessive_level, excision_region, find_power, largest_level, verify_local_excessivity, ExcessiveCandidate,
};
use crate::discretize::Abstraction;
use crate::engine::{bounded_reach_avoid, ValueFn};
use crate::error::{Error, Result};
use crate::formula::{Approx, CheckerContext};
use crate::horizon::{unbounded_reach_avoid_with, HorizonOptions, Sandwich};
use crate::kernel::{DensityKernel, MatrixKernel, PointKernel};
use crate::mclinear::{solve_reach_avoid_exact, SOLVE_ERROR};
use crate::space::{Region, StateSpace};

/// Midpoint of a sandwich, with the half-width as its error.
fn midpoint(s_lower: &ValueFn, s_upper: &ValueFn) -> Result<(ValueFn, f64)> {
    let (l, u) = (s_lower.values(), s_upper.values());
    let mid = l.iter().zip(u).map(|(a, b)| 0.5 * (a + b)).collect();
    let err = l.iter().zip(u).fold(0.0f64, |m, (a, b)| m.max(0.5 * (b - a)));
    Ok((ValueFn::new(s_lower.space().clone(), mid)?, err))
}

fn certificate_details(method: &str, s: &Sandwich) -> serde_json::Value {
    json!({
        "method": method,
        "certificate": s.cert,
        "discretization": s.discretization,
    })
}

/// Exact oracle for a finite chain. With `delta = 0` unbounded until is solved as a
/// linear system; otherwise by iteration to a certified horizon, excising the largest
/// absorbing subset when `A \ B` is not simple.
pub struct FiniteContext {
    kernel: MatrixKernel,
    labels: BTreeMap<String, Region>,
    /// Tail budget for unbounded until; defaults to the requested precision.
    pub epsilon: Option<f64>,
    pub m_max: Option<usize>,
}

impl FiniteContext {
    pub fn new(kernel: MatrixKernel, labels: BTreeMap<String, Region>) -> Result<Self> {
        if labels.values().any(|r| **r.space() != **kernel.space()) {
            return Err(Error::SpaceMismatch);
        }
        Ok(FiniteContext { kernel, labels, epsilon: None, m_max: None })
    }

    pub fn kernel(&self) -> &MatrixKernel {
        &self.kernel
    }

    pub fn labels(&self) -> &BTreeMap<String, Region> {
        &self.labels
    }
}

impl CheckerContext for FiniteContext {
    fn space(&self) -> &Arc<StateSpace> {
        self.kernel.space()
    }

    fn atom(&self, name: &str) -> Result<Region> {
        self.labels.get(name).cloned().ok_or_else(|| Error::UnboundAtom(name.into()))
    }

    fn next_prob(&self, r: &Region, _delta: f64) -> Result<Approx> {
        let v = (0..self.kernel.len()).map(|i| self.kernel.transition_prob(i, r)).collect();
        Ok(Approx::exact(ValueFn::new(self.space().clone(), v)?))
    }

    fn bounded_until(&self, a: &Region, b: &Region, n: usize, _delta: f64) -> Result<Approx> {
        Ok(Approx::exact(bounded_reach_avoid(&self.kernel, a, b, n)?))
    }

    fn until(&self, a: &Region, b: &Region, delta: f64) -> Result<Approx> {
        if delta == 0.0 {
            let w = solve_reach_avoid_exact(&self.kernel, a, b)?;
            return Ok(Approx {
                values: w,
                error: SOLVE_ERROR,
                cell_error: None,
                details: json!({"method": "linear_solve"}),
                conditional: false,
            });
        }
        let opts = HorizonOptions { epsilon: self.epsilon.unwrap_or(delta), m_max: self.m_max, lambda: 0.0 };
        match unbounded_reach_avoid_with(&self.kernel, a, b, opts) {
            Ok(s) => {
                let (values, error) = midpoint(&s.lower, &s.upper)?;
                Ok(Approx { values, error, cell_error: None, details: certificate_details("horizon", &s), conditional: false })
            }
            Err(Error::NonContractive { region, .. }) => {
                // w vanishes on the largest absorbing subset, so excising it loses nothing
                let las = las_finite(&self.kernel, &region).las;
                let d = decompose_reach_avoid(&self.kernel, a, b, &las, Some(0.0), opts)?;
                let (values, error) = midpoint(&d.lower, &d.upper)?;
                let mut details = certificate_details("excision", &d.value);
                details["excised"] = json!(las);
                Ok(Approx { values, error, cell_error: None, details, conditional: false })
            }
            Err(e) => Err(e),
        }
    }
}

/// Oracle over a grid abstraction. Regions live on the chain (cells plus the sink);
/// the sink carries no labels and stands for everything off the grid.
pub struct GridContext {
    abs: Abstraction,
    kernel: Arc<dyn PointKernel>,
    labels: BTreeMap<String, Region>,
    candidate: Option<ExcessiveCandidate>,
    pub epsilon: Option<f64>,
    pub m_max: Option<usize>,
}

/// Built-in excessive candidate: `|x|^q` with the best `q` for the 1D model and
/// `||x||^2` for the 2D one. The level is fixed per query.
pub fn builtin_candidate(kernel: &DensityKernel) -> Option<ExcessiveCandidate> {
    match *kernel {
        DensityKernel::AffineGauss1D { mu, sigma } => {
            let (q, _) = find_power(mu, sigma).ok()?;
            ExcessiveCandidate::abs_power_1d(mu, sigma, q, 1.0).ok()
        }
        DensityKernel::Nonlinear2D => ExcessiveCandidate::norm_squared_2d(1.0).ok(),
    }
}

impl GridContext {
    /// `labels` are regions of the grid.
    pub fn new(abs: Abstraction, kernel: Arc<dyn PointKernel>, labels: BTreeMap<String, Region>) -> Result<Self> {
        let labels = labels.iter().map(|(k, r)| Ok((k.clone(), abs.lift(r)?))).collect::<Result<_>>()?;
        Ok(GridContext { abs, kernel, labels, candidate: None, epsilon: None, m_max: None })
    }

    pub fn with_candidate(mut self, cand: Option<ExcessiveCandidate>) -> Self {
        self.candidate = cand;
        self
    }

    pub fn abstraction(&self) -> &Abstraction {
        &self.abs
    }

    fn cell_lambda(&self) -> Vec<f64> {
        let n = self.abs.grid().len();
        let mut l = match self.abs.cell_lambda() {
            Some(c) => c.to_vec(),
            None => vec![self.abs.lambda(); n],
        };
        l.push(0.0);
        l
    }

    /// Per-state error of `n` abstract reach-avoid steps over `avoid`:
    /// `e_k(i) = lambda_i + min(max e_{k-1}, sum_j p_ij e_{k-1}(j) + lambda_i max e_{k-1})`.
    fn propagate_error(&self, avoid: &Region, n: usize) -> Vec<f64> {
        let lambda = self.cell_lambda();
        let chain = self.abs.chain();
        let mut e = vec![0.0; chain.len()];
        for _ in 0..n {
            let max = e.iter().fold(0.0f64, |m, &v| m.max(v));
            let next: Vec<f64> = (0..chain.len())
                .map(|i| {
                    if !avoid.contains(i) {
                        return 0.0;
                    }
                    let mixed: f64 = chain.row(i).map(|(j, p)| p * e[j]).sum::<f64>() + lambda[i] * max;
                    (lambda[i] + max.min(mixed)).min(1.0)
                })
                .collect();
            if next == e {
                break;
            }
            e = next;
        }
        e
    }

    fn lambda_on(&self, r: &Region) -> Result<f64> {
        Ok(self.abs.lambda_on(&self.abs.project_region(r)?))
    }

    fn excision_route(&self, a: &Region, b: &Region, delta: f64, opts: HorizonOptions) -> Result<Approx> {
        let avoid = a.difference(b)?;
        let avoid_grid = self.abs.project_region(&avoid)?;
        let support = simplicity_by_support(self.kernel.as_ref(), &avoid_grid)?;
        if support.verdict != Verdict::NonSimple {
            return Err(Error::Inconclusive(format!(
                "A \\ B is not contractive on the abstraction and the support criterion gives {:?}",
                support.verdict
            )));
        }
        let base = self
            .candidate
            .as_ref()
            .ok_or_else(|| Error::Inconclusive("no excessive candidate applies to this kernel".into()))?;
        let level = largest_level(base, &avoid_grid)?.min(excessive_level(base, self.abs.grid())?);
        if !level.is_finite() || level <= 0.0 {
            return Err(Error::Inconclusive(format!("no sublevel set of {} fits inside A \\ B", base.name)));
        }
        let cand = base.with_delta(level)?;
        let report = verify_local_excessivity(self.kernel.as_ref(), &cand, &avoid_grid, &support.las)?;
        if !report.passed() {
            return Err(Error::Inconclusive(format!("candidate {} failed: {:?}", cand.name, report.checks)));
        }
        let eps_exc = delta / 2.0;
        let c = excision_region(self.abs.grid(), &cand, eps_exc * level);
        if !support.las.is_subset(&c)? {
            return Err(Error::Inconclusive("grid too coarse to excise the absorbing cells".into()));
        }
        let c = self.abs.lift(&c)?;
        let opts = HorizonOptions { lambda: self.lambda_on(&avoid.difference(&c)?)?, ..opts };
        let d = match decompose_reach_avoid(self.abs.chain(), a, b, &c, Some(eps_exc), opts) {
            Err(Error::NonContractive { .. }) => {
                return Err(Error::Inconclusive("A \\ B minus the excised set is not contractive".into()))
            }
            other => other?,
        };
        let (values, error) = midpoint(&d.lower, &d.upper)?;
        let mut details = certificate_details("excision", &d.value);
        details["candidate"] = json!(cand.name);
        details["level"] = json!(level);
        details["excised_cells"] = json!(d.excision.count());
        details["ledger"] = json!(d.ledger);
        details["excessivity"] = json!(report);
        // the excessivity checks are sampled, not proved
        Ok(Approx { values, error, cell_error: None, details, conditional: true })
    }
}

impl CheckerContext for GridContext {
    fn space(&self) -> &Arc<StateSpace> {
        self.abs.chain().space()
    }

    fn atom(&self, name: &str) -> Result<Region> {
        self.labels.get(name).cloned().ok_or_else(|| Error::UnboundAtom(name.into()))
    }

    fn next_prob(&self, r: &Region, _delta: f64) -> Result<Approx> {
        let chain = self.abs.chain();
        let v = (0..chain.len()).map(|i| chain.transition_prob(i, r)).collect();
        let e = self.cell_lambda();
        Ok(Approx {
            values: ValueFn::new(self.space().clone(), v)?,
            error: e.iter().fold(0.0f64, |m, &v| m.max(v)),
            cell_error: Some(e),
            details: json!({"method": "abstraction", "lambda": self.abs.lambda()}),
            conditional: false,
        })
    }

    fn bounded_until(&self, a: &Region, b: &Region, n: usize, _delta: f64) -> Result<Approx> {
        let w = bounded_reach_avoid(self.abs.chain(), a, b, n)?;
        let e = self.propagate_error(&a.difference(b)?, n);
        Ok(Approx {
            values: w,
            error: e.iter().fold(0.0f64, |m, &v| m.max(v)),
            cell_error: Some(e),
            details: json!({"method": "abstraction", "lambda": self.abs.lambda(), "steps": n}),
            conditional: false,
        })
    }

    fn until(&self, a: &Region, b: &Region, delta: f64) -> Result<Approx> {
        if delta == 0.0 {
            return Err(Error::PrecisionUnavailable { requested: 0.0, achieved: self.abs.lambda() });
        }
        let avoid = a.difference(b)?;
        let opts = HorizonOptions {
            epsilon: self.epsilon.unwrap_or(delta / 2.0),
            m_max: self.m_max,
            lambda: self.lambda_on(&avoid)?,
        };
        match unbounded_reach_avoid_with(self.abs.chain(), a, b, opts) {
            Ok(s) => {
                let (values, error) = midpoint(&s.lower, &s.upper)?;
                Ok(Approx { values, error, cell_error: None, details: certificate_details("horizon", &s), conditional: false })
            }
            Err(Error::NonContractive { .. }) => self.excision_route(a, b, delta, opts),
            Err(e) => Err(e),
        }
    }
}
