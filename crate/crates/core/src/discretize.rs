//! Finite-chain abstraction of a density kernel on a grid, with an explicit per-step
//! error constant, and the additive error ledger.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::ValueFn;
use crate::error::{Error, Result};
use crate::kernel::{CellKernel, MatrixKernel, PointKernel};
use crate::space::{Region, StateSpace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaProvenance {
    UserSupplied,
    LipschitzDerived,
    /// Per-cell supremum of the total-variation distance between the kernel at
    /// a point of the cell and at its center, evaluated on a lattice of points.
    TotalVariation,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaSpec {
    User(f64),
    /// Lipschitz constant `L` of the conditional distribution; `lambda = L h`.
    Lipschitz(f64),
    /// Sample `points_per_axis` points per axis in every cell, corners included.
    TotalVariation { points_per_axis: usize },
}

impl LambdaSpec {
    pub fn total_variation() -> Self {
        LambdaSpec::TotalVariation { points_per_axis: 5 }
    }
}

/// A finite chain over the grid cells plus one absorbing sink (the last state),
/// which collects the mass leaving the grid.
#[derive(Clone, Debug)]
pub struct Abstraction {
    chain: MatrixKernel,
    grid: Arc<StateSpace>,
    lambda: f64,
    cell_lambda: Option<Vec<f64>>,
    provenance: LambdaProvenance,
}

impl Abstraction {
    pub fn chain(&self) -> &MatrixKernel {
        &self.chain
    }

    pub fn grid(&self) -> &Arc<StateSpace> {
        &self.grid
    }

    pub fn sink(&self) -> usize {
        self.grid.len()
    }

    pub fn provenance(&self) -> LambdaProvenance {
        self.provenance
    }

    /// Global per-step error.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Per-step error over the rows of `r`: only rows inside the iterated set
    /// contribute to the error of the DP recursions.
    pub fn lambda_on(&self, r: &Region) -> f64 {
        match &self.cell_lambda {
            Some(cells) => r.indices().fold(0.0, |m, i| m.max(cells[i])),
            None => self.lambda,
        }
    }

    pub fn cell_lambda(&self) -> Option<&[f64]> {
        self.cell_lambda.as_deref()
    }

    /// Grid region as a region of the chain; the sink is never included.
    pub fn lift(&self, r: &Region) -> Result<Region> {
        if **r.space() != *self.grid {
            return Err(Error::SpaceMismatch);
        }
        let mut mask = r.mask().to_vec();
        mask.push(false);
        Region::from_mask(self.chain.space(), mask)
    }

    /// Chain region restricted to the grid cells.
    pub fn project_region(&self, r: &Region) -> Result<Region> {
        Region::from_mask(&self.grid, r.mask()[..self.grid.len()].to_vec())
    }

    /// Chain value function restricted to the grid cells.
    pub fn project(&self, v: &ValueFn) -> Result<ValueFn> {
        ValueFn::new(self.grid.clone(), v.values()[..self.grid.len()].to_vec())
    }

    /// Sparse dump `from,to,p` of the abstract transition matrix.
    pub fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "from,to,p")?;
        for i in 0..self.chain.len() {
            for (j, p) in self.chain.row(i) {
                writeln!(out, "{i},{j},{p}")?;
            }
        }
        Ok(())
    }
}

impl CellKernel for Abstraction {
    fn cell_space(&self) -> &Arc<StateSpace> {
        &self.grid
    }

    fn prob_to_region(&self, i: usize, r: &Region) -> f64 {
        self.chain.row(i).filter(|&(j, _)| j < self.grid.len() && r.contains(j)).fold(0.0, |acc, (_, p)| acc + p)
    }
}

/// Fails unless the grid bounds contain the box.
pub fn ensure_covers(grid: &StateSpace, bx: &[(f64, f64)]) -> Result<()> {
    let bounds = grid.bounds()?;
    let ok = bounds.len() == bx.len() && bounds.iter().zip(bx).all(|(&(lo, hi), &(a, b))| lo <= a && b <= hi);
    if ok {
        Ok(())
    } else {
        Err(Error::BoxOutOfBounds { requested: bx.to_vec(), bounds })
    }
}

fn lattice(bounds: &[(f64, f64)], k: usize) -> Vec<Vec<f64>> {
    let ticks: Vec<Vec<f64>> = bounds
        .iter()
        .map(|&(lo, hi)| (0..k).map(|t| lo + (hi - lo) * t as f64 / (k - 1) as f64).collect())
        .collect();
    match ticks.len() {
        1 => ticks[0].iter().map(|&x| vec![x]).collect(),
        _ => ticks[1].iter().flat_map(|&y| ticks[0].iter().map(move |&x| vec![x, y])).collect(),
    }
}

fn tv_cell_lambda(kernel: &dyn PointKernel, grid: &StateSpace, i: usize, k: usize) -> Result<f64> {
    let bounds = grid.cell_bounds(i);
    let center = grid.center(i);
    // an absorbing point in the cell puts a point mass next to diffuse laws
    let holds_atom = kernel
        .absorbing_points()
        .iter()
        .any(|p| p.iter().zip(&bounds).all(|(&v, &(lo, hi))| lo <= v && v <= hi));
    if holds_atom {
        return Ok(1.0);
    }
    let mut worst: f64 = 0.0;
    for x in lattice(&bounds, k) {
        let d = kernel.tv_distance(&center, &x).ok_or(Error::MissingLambda)?;
        worst = worst.max(d);
    }
    Ok(worst.min(1.0))
}

/// Builds the abstraction: row `i` holds the exact mass of every cell under the
/// kernel at the center of cell `i`, and the escaping mass goes to the sink.
pub fn discretize(kernel: &dyn PointKernel, grid: Arc<StateSpace>, lambda: Option<LambdaSpec>) -> Result<Abstraction> {
    let spec = lambda.ok_or(Error::MissingLambda)?;
    if !grid.is_grid() {
        return Err(Error::NotAGrid);
    }
    if grid.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch { expected: kernel.dim(), got: grid.dim() });
    }
    let n = grid.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let (mut row, sink) = kernel.cell_probabilities(&grid.center(i), &grid)?;
            row.push(sink);
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut rows = rows;
    let mut sink_row = vec![0.0; n + 1];
    sink_row[n] = 1.0;
    rows.push(sink_row);
    let chain = MatrixKernel::normalized(Arc::new(StateSpace::finite(n + 1)?), rows)?;
    let (lambda, cell_lambda, provenance) = match spec {
        LambdaSpec::User(l) if l >= 0.0 => (l, None, LambdaProvenance::UserSupplied),
        LambdaSpec::Lipschitz(l) if l >= 0.0 => {
            (l * grid.max_cell_diameter(), None, LambdaProvenance::LipschitzDerived)
        }
        LambdaSpec::TotalVariation { points_per_axis } if points_per_axis >= 2 => {
            let cells: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|i| tv_cell_lambda(kernel, &grid, i, points_per_axis))
                .collect::<Result<_>>()?;
            let max = cells.iter().fold(0.0f64, |m, &v| m.max(v));
            (max, Some(cells), LambdaProvenance::TotalVariation)
        }
        other => return Err(Error::InvalidArgument(format!("invalid lambda specification {other:?}"))),
    };
    Ok(Abstraction { chain, grid, lambda, cell_lambda, provenance })
}

/// Additive composition of the certified error sources, each capped at 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorLedger {
    pub discretization: f64,
    pub tail: f64,
    pub excision: f64,
    pub total: f64,
}

impl ErrorLedger {
    pub fn compose(discretization: f64, tail: f64, excision: f64) -> Self {
        let discretization = discretization.clamp(0.0, 1.0);
        let tail = tail.clamp(0.0, 1.0);
        let excision = excision.clamp(0.0, 1.0);
        ErrorLedger { discretization, tail, excision, total: (discretization + tail + excision).min(1.0) }
    }
}

/// Ledger for an `n`-step computation on `abs`: the discretization entry is
/// `min(1, lambda n)`.
pub fn total_error(abs: &Abstraction, n: usize, tail: f64, excision: f64) -> ErrorLedger {
    ErrorLedger::compose(abs.lambda() * n as f64, tail, excision)
}
