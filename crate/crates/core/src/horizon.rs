//! Contraction analysis: `m(A)`, `rho(A)`, the geometric tail bound and horizon
//! planning for infinite-horizon reach-avoid.

use serde::Serialize;

use crate::engine::{iterate, ValueFn};
use crate::error::{Error, Result};
use crate::kernel::MatrixKernel;
use crate::space::Region;

/// Margin on the `||u_m|| < 1` test so that iterates hovering at `1 - ulp` are not
/// mistaken for contraction.
pub const ETA: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertStatus {
    Certified,
    /// `m_max` was exhausted without `||u_m|| < 1`.
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub m: usize,
    pub rho: f64,
    pub horizon: usize,
    pub tail: f64,
    pub status: CertStatus,
    /// `rho^floor(n/m)` without the `m/(1-rho)` prefactor; reported for comparison only.
    pub rho_power: f64,
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        self.status == CertStatus::Certified
    }

    fn unknown(m_max: usize) -> Self {
        Certificate { m: m_max, rho: 1.0, horizon: 0, tail: 1.0, status: CertStatus::Unknown, rho_power: 1.0 }
    }

    /// Re-targets a certified record at horizon `n`.
    pub fn at_horizon(&self, n: usize) -> Result<Self> {
        if !self.is_certified() {
            return Ok(self.clone());
        }
        let (tail, rho_power) = if self.m == 0 {
            (0.0, 0.0)
        } else {
            (tail_bound(self.m, self.rho, n)?, self.rho.powi((n / self.m) as i32))
        };
        Ok(Certificate { horizon: n, tail, rho_power, ..self.clone() })
    }
}

/// First `m <= m_max` with `||u_m(.; A)|| < 1 - ETA`, and `rho = ||u_m||`.
pub fn compute_m_rho(kernel: &MatrixKernel, a: &Region, m_max: usize) -> Result<Certificate> {
    if m_max < 1 {
        return Err(Error::InvalidArgument("m_max must be at least 1".into()));
    }
    if a.is_empty() {
        return Ok(Certificate {
            m: 0,
            rho: 0.0,
            horizon: 0,
            tail: 0.0,
            status: CertStatus::Certified,
            rho_power: 0.0,
        });
    }
    let zero = vec![0.0; kernel.len()];
    let mut found = None;
    iterate(kernel, a.mask(), &zero, ValueFn::indicator(a).into_values(), m_max, |k, u| {
        let norm = u.iter().fold(0.0f64, |m, &v| m.max(v));
        if k >= 1 && norm < 1.0 - ETA {
            found = Some((k, norm));
            false
        } else {
            true
        }
    });
    match found {
        Some((m, rho)) => {
            let base = Certificate { m, rho, horizon: 0, tail: 1.0, status: CertStatus::Certified, rho_power: 1.0 };
            base.at_horizon(m)
        }
        None => Ok(Certificate::unknown(m_max)),
    }
}

/// `m/(1-rho) * rho^floor(n/m)` before capping.
pub fn tail_bound_raw(m: usize, rho: f64, n: usize) -> Result<f64> {
    if m < 1 {
        return Err(Error::InvalidArgument("tail bound needs m >= 1".into()));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::NotContractive(rho));
    }
    let k = n / m;
    if rho == 0.0 {
        return Ok(if k == 0 { m as f64 } else { 0.0 });
    }
    Ok(m as f64 / (1.0 - rho) * rho.powi(k.min(i32::MAX as usize) as i32))
}

/// Bound on `w - w_n`, capped at 1.
pub fn tail_bound(m: usize, rho: f64, n: usize) -> Result<f64> {
    Ok(tail_bound_raw(m, rho, n)?.min(1.0))
}

/// Smallest `n` with `tail_bound(m, rho, n) <= eps`.
pub fn plan_horizon(m: usize, rho: f64, eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0,1), got {eps}")));
    }
    tail_bound_raw(m, rho, 0)?;
    if rho == 0.0 {
        return Ok(m);
    }
    let guess = ((eps * (1.0 - rho) / m as f64).ln() / rho.ln()).ceil().max(0.0) as usize;
    // log rounding can be off by one either way; settle on the staircase directly
    let mut k = guess.saturating_sub(2);
    while tail_bound(m, rho, k * m)? > eps {
        k += 1;
    }
    Ok(k * m)
}

/// Certified two-sided bounds on the unbounded reach-avoid value.
#[derive(Clone, Debug)]
pub struct Sandwich {
    pub lower: ValueFn,
    pub upper: ValueFn,
    pub cert: Certificate,
    /// Accumulated abstraction error `lambda * n`, zero for exact kernels.
    pub discretization: f64,
}

/// Options for [`unbounded_reach_avoid_with`].
#[derive(Clone, Copy, Debug)]
pub struct HorizonOptions {
    pub epsilon: f64,
    /// Defaults to `|A \ B| + 1`.
    pub m_max: Option<usize>,
    /// Per-step sup-norm error of the kernel against the process it stands for.
    pub lambda: f64,
}

impl HorizonOptions {
    pub fn exact(epsilon: f64) -> Self {
        HorizonOptions { epsilon, m_max: None, lambda: 0.0 }
    }
}

/// `w(.; A, B)` to within `eps`, or `NonContractive` when `A \ B` cannot be certified.
pub fn unbounded_reach_avoid(kernel: &MatrixKernel, a: &Region, b: &Region, eps: f64) -> Result<Sandwich> {
    unbounded_reach_avoid_with(kernel, a, b, HorizonOptions::exact(eps))
}

pub fn unbounded_reach_avoid_with(
    kernel: &MatrixKernel,
    a: &Region,
    b: &Region,
    opts: HorizonOptions,
) -> Result<Sandwich> {
    let avoid = a.difference(b)?;
    let indicator = ValueFn::indicator(b);
    let m_max = opts.m_max.unwrap_or(avoid.count() + 1);
    if b.is_empty() {
        // nothing to reach: w = 0 without any iteration
        let cert = compute_m_rho(kernel, &Region::empty(kernel.space()), 1)?;
        return Ok(Sandwich { lower: indicator.clone(), upper: indicator, cert, discretization: 0.0 });
    }
    let cert = compute_m_rho(kernel, &avoid, m_max)?;
    if !cert.is_certified() {
        return Err(Error::NonContractive { region: avoid, m_max });
    }
    if cert.m == 0 {
        return Ok(Sandwich { lower: indicator.clone(), upper: indicator, cert, discretization: 0.0 });
    }
    // the abstract u_m is within m*lambda of the true one
    let rho = cert.rho + cert.m as f64 * opts.lambda;
    if rho >= 1.0 - ETA {
        return Err(Error::NonContractive { region: avoid, m_max });
    }
    let n = plan_horizon(cert.m, rho, opts.epsilon)?;
    let base = indicator.values().to_vec();
    let w = iterate(kernel, avoid.mask(), &base, base.clone(), n, |_, _| true);
    let disc = (opts.lambda * n as f64).min(1.0);
    let cert = Certificate { rho, ..cert }.at_horizon(n)?;
    let space = kernel.space().clone();
    let lower = ValueFn::new(space.clone(), w.iter().map(|v| v - disc).collect())?;
    let upper = ValueFn::new(space, w.iter().map(|v| v + disc + cert.tail).collect())?;
    Ok(Sandwich { lower, upper, cert, discretization: disc })
}
