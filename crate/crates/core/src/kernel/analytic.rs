//! Closed-form and quadrature analytics for the built-in kernel families.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::quad::integrate;
use crate::error::{Error, Result};

/// Absolute tolerance for the moment integrals.
pub const QUAD_TOL: f64 = 1e-8;
// standard normal mass beyond this many deviations is below 1e-40
const TRUNCATION: f64 = 13.5;

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Upper tail `1 - cdf(z)`, accurate far into the tail.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

/// Standard normal mass of `[a, b]`, evaluated on the side of the mean that avoids
/// cancellation.
pub fn normal_interval(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let p = if a >= 0.0 {
        normal_sf(a) - normal_sf(b)
    } else if b <= 0.0 {
        normal_sf(-b) - normal_sf(-a)
    } else {
        1.0 - normal_sf(-a) - normal_sf(b)
    };
    p.max(0.0)
}

/// Mass of `[lo, hi]` under `N(mean, sd^2)`.
pub fn gaussian_interval(mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    normal_interval((lo - mean) / sd, (hi - mean) / sd)
}

/// Total-variation distance between `N(m1, s1^2)` and `N(m2, s2^2)`.
pub fn tv_normals(m1: f64, s1: f64, m2: f64, s2: f64) -> f64 {
    if m1 == m2 && s1 == s2 {
        return 0.0;
    }
    if (s1 - s2).abs() <= 1e-14 * s1.max(s2) {
        let d = (m1 - m2).abs() / (2.0 * s1);
        return normal_interval(-d, d);
    }
    // log p1 - log p2 = a y^2 + b y + c, with real roots since the variances differ
    let a = 0.5 / (s2 * s2) - 0.5 / (s1 * s1);
    let b = m1 / (s1 * s1) - m2 / (s2 * s2);
    let c = m2 * m2 / (2.0 * s2 * s2) - m1 * m1 / (2.0 * s1 * s1) + (s2 / s1).ln();
    let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
    let q = -0.5 * (b + b.signum() * disc);
    let (mut r1, mut r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    if r1 > r2 {
        std::mem::swap(&mut r1, &mut r2);
    }
    let p1 = gaussian_interval(m1, s1, r1, r2);
    let p2 = gaussian_interval(m2, s2, r1, r2);
    (p1 - p2).abs().min(1.0)
}

/// Integrates `f(z) * phi(z)` over the real line, splitting at `kink` and
/// substituting `z = kink +- t^2` on each side so that power and log singularities
/// at the kink become integrable and smooth enough for Gauss–Kronrod.
fn gaussian_expectation_split(f: impl Fn(f64) -> f64, kink: f64) -> Result<f64> {
    let lo = -TRUNCATION;
    let hi = TRUNCATION;
    let piece = |from: f64, to: f64, sign: f64| -> Result<f64> {
        if to <= from {
            return Ok(0.0);
        }
        let span = (to - from).sqrt();
        integrate(
            |t| {
                let z = kink + sign * t * t;
                let v = f(z);
                if v.is_finite() {
                    2.0 * t * v * normal_pdf(z)
                } else {
                    0.0
                }
            },
            0.0,
            span,
            0.25 * QUAD_TOL,
        )
    };
    if kink <= lo || kink >= hi {
        return integrate(|z| f(z) * normal_pdf(z), lo, hi, 0.5 * QUAD_TOL);
    }
    Ok(piece(kink, hi, 1.0)? + piece(lo, kink, -1.0)?)
}

/// Expected log-increment `E log|mu + sigma xi|` of the multiplicative walk driving
/// the 1D affine Gaussian model. Its sign separates a.s. escape from a.s. decay.
pub fn affine_gauss_drift(mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    gaussian_expectation_split(|z| (mu + sigma * z).abs().ln(), -mu / sigma)
}

/// Moment `E|mu + sigma xi|^q`. The power function `|x|^q` is scaled by exactly this
/// factor under one step of the 1D affine Gaussian model.
pub fn affine_gauss_moment(mu: f64, sigma: f64, q: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    if !(q >= 0.0) {
        return Err(Error::InvalidArgument(format!("moment order must be non-negative, got {q}")));
    }
    if q == 0.0 {
        return Ok(1.0);
    }
    gaussian_expectation_split(|z| (mu + sigma * z).abs().powf(q), -mu / sigma)
}

/// Expected squared norm after one step of the 2D nonlinear model.
pub fn nonlinear2d_pg(x1: f64, x2: f64) -> f64 {
    let (a2, b2) = (x1 * x1, x2 * x2);
    let (a3, b3) = (a2 * x1, b2 * x2);
    let (a4, b4) = (a2 * a2, b2 * b2);
    (144.0 * a2 + 197.0 * b2 - 474.0 * a2 * b2 + 1098.0 * a4 * b2 - 648.0 * x1 * b3
        + 2592.0 * a3 * b3
        - 586.0 * b4
        + 5136.0 * a2 * b4
        + 3888.0 * x1 * b4 * x2
        + 1658.0 * b4 * b2)
        / 200.0
}
