use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::space::{Region, StateSpace};

/// Rows sparser than this fraction of non-zeros are stored in CSR form.
pub const SPARSE_DENSITY: f64 = 0.25;
/// Allowed deviation of a row sum from one.
pub const ROW_SUM_SLACK: f64 = 1e-12;
// below this many states operator applications stay on the calling thread
const PAR_THRESHOLD: usize = 256;

#[derive(Clone, Debug)]
enum Storage {
    Dense { data: Vec<f64> },
    Sparse { row_ptr: Vec<usize>, cols: Vec<usize>, vals: Vec<f64> },
}

/// Stochastic matrix `p_ij` of a finite chain.
#[derive(Clone, Debug)]
pub struct MatrixKernel {
    space: Arc<StateSpace>,
    n: usize,
    storage: Storage,
}

impl MatrixKernel {
    /// Builds a kernel over a fresh finite space; rows must be stochastic.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let space = Arc::new(StateSpace::finite(rows.len())?);
        Self::with_space(space, rows)
    }

    pub fn with_space(space: Arc<StateSpace>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = space.len();
        if rows.len() != n {
            return Err(Error::InvalidArgument(format!(
                "{} rows for a space of {} states",
                rows.len(),
                n
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotStochastic { row: i, reason: format!("length {} != {}", row.len(), n) });
            }
            if let Some(p) = row.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
                return Err(Error::NotStochastic { row: i, reason: format!("entry {p} is not a probability") });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_SLACK {
                return Err(Error::NotStochastic { row: i, reason: format!("sums to {sum}") });
            }
        }
        Ok(Self::from_rows_unchecked(space, rows))
    }

    /// Rescales each non-negative row to sum to one before building the kernel.
    pub fn normalized(space: Arc<StateSpace>, mut rows: Vec<Vec<f64>>) -> Result<Self> {
        for (i, row) in rows.iter_mut().enumerate() {
            let sum: f64 = row.iter().sum();
            if !(sum > 0.0) || row.iter().any(|p| !(*p >= 0.0)) {
                return Err(Error::NotStochastic { row: i, reason: format!("cannot normalise row with sum {sum}") });
            }
            row.iter_mut().for_each(|p| *p /= sum);
        }
        Self::with_space(space, rows)
    }

    fn from_rows_unchecked(space: Arc<StateSpace>, rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        let nnz: usize = rows.iter().map(|r| r.iter().filter(|&&p| p > 0.0).count()).sum();
        let density = nnz as f64 / (n * n) as f64;
        let storage = if density < SPARSE_DENSITY {
            let mut row_ptr = Vec::with_capacity(n + 1);
            let mut cols = Vec::with_capacity(nnz);
            let mut vals = Vec::with_capacity(nnz);
            row_ptr.push(0);
            for row in &rows {
                for (j, &p) in row.iter().enumerate() {
                    if p > 0.0 {
                        cols.push(j);
                        vals.push(p);
                    }
                }
                row_ptr.push(cols.len());
            }
            Storage::Sparse { row_ptr, cols, vals }
        } else {
            Storage::Dense { data: rows.into_iter().flatten().collect() }
        };
        MatrixKernel { space, n, storage }
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse { .. })
    }

    /// Non-zero entries of row `i` in ascending column order.
    pub fn row(&self, i: usize) -> Box<dyn Iterator<Item = (usize, f64)> + '_> {
        match &self.storage {
            Storage::Dense { data } => Box::new(
                data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .copied()
                    .enumerate()
                    .filter(|(_, p)| *p > 0.0),
            ),
            Storage::Sparse { row_ptr, cols, vals } => {
                let r = row_ptr[i]..row_ptr[i + 1];
                Box::new(cols[r.clone()].iter().copied().zip(vals[r].iter().copied()))
            }
        }
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense { data } => data[i * self.n + j],
            Storage::Sparse { row_ptr, cols, vals } => {
                let r = row_ptr[i]..row_ptr[i + 1];
                match cols[r.clone()].binary_search(&j) {
                    Ok(k) => vals[r.start + k],
                    Err(_) => 0.0,
                }
            }
        }
    }

    /// `sum_j p_ij f_j`, summed in ascending `j`.
    pub fn row_dot(&self, i: usize, f: &[f64]) -> f64 {
        match &self.storage {
            Storage::Dense { data } => data[i * self.n..(i + 1) * self.n]
                .iter()
                .zip(f)
                .fold(0.0, |acc, (p, v)| acc + p * v),
            Storage::Sparse { row_ptr, cols, vals } => (row_ptr[i]..row_ptr[i + 1])
                .fold(0.0, |acc, k| acc + vals[k] * f[cols[k]]),
        }
    }

    /// `P(i, R)`.
    pub fn transition_prob(&self, i: usize, r: &Region) -> f64 {
        self.row(i).filter(|(j, _)| r.contains(*j)).fold(0.0, |acc, (_, p)| acc + p)
    }

    /// Applies `out_i = if keep(i) { row_dot(i, f) } else { 0 }` for every state. Each
    /// output is reduced in a fixed order, so the result does not depend on how rows
    /// are scheduled across threads.
    pub fn apply_masked(&self, f: &[f64], keep: &[bool]) -> Vec<f64> {
        let eval = |i: usize| if keep[i] { self.row_dot(i, f) } else { 0.0 };
        if self.n >= PAR_THRESHOLD {
            (0..self.n).into_par_iter().map(eval).collect()
        } else {
            (0..self.n).map(eval).collect()
        }
    }

    /// Edges `i -> j` with `p_ij > 0`, reversed: `preds[j]` lists every `i`.
    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut preds = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for (j, _) in self.row(i) {
                preds[j].push(i);
            }
        }
        preds
    }

    /// Dense copy of the matrix, row-major.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for (j, p) in self.row(i) {
                out[i * self.n + j] = p;
            }
        }
        out
    }
}
