use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::analytic::{gaussian_interval, normal_pdf, tv_normals};
use super::PointKernel;
use crate::error::{Error, Result};
use crate::space::StateSpace;

// noise scale of the 2D model, per unit of the state norm
const NOISE_2D: f64 = 0.6;

/// Built-in density kernels. Both have a point mass at the origin and a Gaussian
/// transition law everywhere else.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DensityKernel {
    /// `x' = mu x + sigma x xi`.
    AffineGauss1D { mu: f64, sigma: f64 },
    /// Polynomial drift with state-proportional noise on each coordinate.
    Nonlinear2D,
}

impl DensityKernel {
    pub fn affine_gauss_1d(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !mu.is_finite() || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("need finite mu and sigma > 0, got ({mu}, {sigma})")));
        }
        Ok(DensityKernel::AffineGauss1D { mu, sigma })
    }

    pub fn nonlinear_2d() -> Self {
        DensityKernel::Nonlinear2D
    }

    /// Per-coordinate mean and standard deviation of `P(x, .)`. The coordinates are
    /// independent, so the law is a product of one-dimensional Gaussians.
    pub fn marginals(&self, x: &[f64]) -> Vec<(f64, f64)> {
        match *self {
            DensityKernel::AffineGauss1D { mu, sigma } => vec![(mu * x[0], sigma * x[0].abs())],
            DensityKernel::Nonlinear2D => {
                let (x1, x2) = (x[0], x[1]);
                let m1 = 0.5 * x2 * (3.0 * x1 * x1 + 2.0 * x2 * x2 - 0.5);
                let m2 = 0.9 * x2 * (2.0 * x1 * x1 + 4.0 * x1 * x2 + 3.0 * x2 * x2 - 0.5);
                let s = NOISE_2D * x1.hypot(x2);
                vec![(m1, s), (m2, s)]
            }
        }
    }

    fn is_origin(x: &[f64]) -> bool {
        x.iter().all(|&v| v == 0.0)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }
}

impl PointKernel for DensityKernel {
    fn dim(&self) -> usize {
        match self {
            DensityKernel::AffineGauss1D { .. } => 1,
            DensityKernel::Nonlinear2D => 2,
        }
    }

    fn prob_box(&self, x: &[f64], bx: &[(f64, f64)]) -> Result<f64> {
        self.check_dim(x)?;
        if bx.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: bx.len() });
        }
        if Self::is_origin(x) {
            let inside = bx.iter().all(|&(lo, hi)| lo <= 0.0 && 0.0 < hi);
            return Ok(if inside { 1.0 } else { 0.0 });
        }
        Ok(self
            .marginals(x)
            .iter()
            .zip(bx)
            .map(|(&(m, s), &(lo, hi))| gaussian_interval(m, s, lo, hi))
            .product())
    }

    fn density(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        if Self::is_origin(x) || x.len() != self.dim() || y.len() != self.dim() {
            return None;
        }
        Some(self.marginals(x).iter().zip(y).map(|(&(m, s), &v)| normal_pdf((v - m) / s) / s).product())
    }

    fn absorbing_points(&self) -> Vec<Vec<f64>> {
        vec![vec![0.0; self.dim()]]
    }

    fn full_support(&self, x: &[f64]) -> Option<bool> {
        Some(!Self::is_origin(x))
    }

    fn sample(&self, x: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        self.marginals(x)
            .into_iter()
            .map(|(m, s)| {
                let z: f64 = StandardNormal.sample(rng);
                m + s * z
            })
            .collect()
    }

    fn tv_distance(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        match (Self::is_origin(x), Self::is_origin(y)) {
            (true, true) => return Some(0.0),
            (true, false) | (false, true) => return Some(1.0),
            _ => {}
        }
        // TV of a product law is at most the sum of the marginal distances
        let d: f64 = self
            .marginals(x)
            .iter()
            .zip(self.marginals(y))
            .map(|(&(m1, s1), (m2, s2))| tv_normals(m1, s1, m2, s2))
            .sum();
        Some(d.min(1.0))
    }

    fn cell_probabilities(&self, x: &[f64], grid: &StateSpace) -> Result<(Vec<f64>, f64)> {
        self.check_dim(x)?;
        let axes = grid.axes()?;
        if axes.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: axes.len() });
        }
        let mut cells = vec![0.0; grid.len()];
        if Self::is_origin(x) {
            return Ok(match grid.cell_of_point(x) {
                Some(i) => {
                    cells[i] = 1.0;
                    (cells, 0.0)
                }
                None => (cells, 1.0),
            });
        }
        // separable: cell mass is the product of per-axis interval masses
        let per_axis: Vec<Vec<f64>> = self
            .marginals(x)
            .iter()
            .zip(axes)
            .map(|(&(m, s), a)| (0..a.cells).map(|k| gaussian_interval(m, s, a.edge(k), a.edge(k + 1))).collect())
            .collect();
        let n1 = axes[0].cells;
        for (i, c) in cells.iter_mut().enumerate() {
            *c = per_axis.iter().enumerate().fold(1.0, |acc, (d, masses)| {
                let k = if d == 0 { i % n1 } else { i / n1 };
                acc * masses[k]
            });
        }
        let inside: f64 = per_axis.iter().map(|m| m.iter().sum::<f64>()).product();
        Ok((cells, (1.0 - inside).max(0.0)))
    }
}
