//! Stochastic kernels: finite matrices, the built-in density families and the
//! analytic quantities attached to them.

pub mod analytic;
mod density;
mod matrix;
pub mod quad;

use std::sync::Arc;

use rand::RngCore;

pub use density::DensityKernel;
pub use matrix::{MatrixKernel, ROW_SUM_SLACK, SPARSE_DENSITY};

use crate::error::{Error, Result};
use crate::space::{Region, StateSpace};

/// A kernel over an indexed state set, as consumed by the DP engine.
pub trait CellKernel: Sync {
    fn cell_space(&self) -> &Arc<StateSpace>;

    /// `P(i, R)` for state or cell `i`.
    fn prob_to_region(&self, i: usize, r: &Region) -> f64;
}

impl CellKernel for MatrixKernel {
    fn cell_space(&self) -> &Arc<StateSpace> {
        self.space()
    }

    fn prob_to_region(&self, i: usize, r: &Region) -> f64 {
        self.transition_prob(i, r)
    }
}

/// Kernel on points of `R^d`. This is the contract user-defined kernels implement
/// to plug into abstraction, support analysis and simulation.
pub trait PointKernel: Send + Sync {
    fn dim(&self) -> usize;

    /// `P(x, box)` for an axis-aligned box.
    fn prob_box(&self, x: &[f64], bx: &[(f64, f64)]) -> Result<f64>;

    /// Density `p(x, y)` with respect to Lebesgue measure, if `P(x, .)` has one.
    fn density(&self, _x: &[f64], _y: &[f64]) -> Option<f64> {
        None
    }

    /// Points `x` with `P(x, {x}) = 1`.
    fn absorbing_points(&self) -> Vec<Vec<f64>> {
        Vec::new()
    }

    /// Whether the support of `P(x, .)` is the whole space; `None` if unknown.
    fn full_support(&self, _x: &[f64]) -> Option<bool> {
        None
    }

    /// One step of the dynamics from `x`.
    fn sample(&self, x: &[f64], rng: &mut dyn RngCore) -> Vec<f64>;

    /// An upper bound on the total-variation distance between `P(x, .)` and `P(y, .)`.
    fn tv_distance(&self, _x: &[f64], _y: &[f64]) -> Option<f64> {
        None
    }

    /// Mass of every cell of `grid` under `P(x, .)` plus the mass escaping the grid.
    fn cell_probabilities(&self, x: &[f64], grid: &StateSpace) -> Result<(Vec<f64>, f64)> {
        let mut out = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            out.push(self.prob_box(x, &grid.cell_bounds(i))?);
        }
        let inside: f64 = out.iter().sum();
        Ok((out, (1.0 - inside).max(0.0)))
    }
}

/// `P(x, R)` for a point kernel and a Region over a grid. Regions are unions of
/// cells, so this is the sum of the cell masses, with point masses placed in the
/// cell that contains the absorbing point.
pub fn transition_prob(kernel: &dyn PointKernel, x: &[f64], r: &Region) -> Result<f64> {
    let space = r.space();
    if x.len() != kernel.dim() {
        return Err(Error::DimensionMismatch { expected: kernel.dim(), got: x.len() });
    }
    if space.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch { expected: kernel.dim(), got: space.dim() });
    }
    let (cells, _) = kernel.cell_probabilities(x, space)?;
    Ok(r.indices().fold(0.0, |acc, i| acc + cells[i]).min(1.0))
}
