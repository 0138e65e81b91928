//! Invariance operator and the finite-horizon reach-avoid / invariance recursions.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::MatrixKernel;
use crate::space::{Region, StateSpace};

/// Clamping beyond this magnitude is reported as a diagnostic.
pub const CLAMP_WARN: f64 = 1e-9;

/// Per-index probabilities over a state space.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValueFn {
    #[serde(skip)]
    space: Arc<StateSpace>,
    values: Vec<f64>,
}

impl ValueFn {
    /// Wraps `values`, clamping them to `[0, 1]`.
    pub fn new(space: Arc<StateSpace>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::InvalidArgument(format!(
                "value vector of length {} for a space of {} states",
                values.len(),
                space.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| v.is_nan()) {
            return Err(Error::InvalidArgument(format!("value {v} is not a number")));
        }
        clamp_unit(&mut values);
        Ok(ValueFn { space, values })
    }

    pub fn constant(space: &Arc<StateSpace>, c: f64) -> Self {
        ValueFn { space: space.clone(), values: vec![c.clamp(0.0, 1.0); space.len()] }
    }

    pub fn indicator(r: &Region) -> Self {
        ValueFn {
            space: r.space().clone(),
            values: r.mask().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    /// Max-norm distance to another function on the same space.
    pub fn distance(&self, other: &ValueFn) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `{i : pred(v_i)}`.
    pub fn level_set(&self, pred: impl Fn(f64) -> bool) -> Region {
        Region::from_predicate(&self.space, |i| pred(self.values[i]))
    }

    /// Maps every value through `f`, clamping the result.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ValueFn {
        let mut values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        clamp_unit(&mut values);
        ValueFn { space: self.space.clone(), values }
    }

    /// Writes `index,x1[,x2],value` rows; finite spaces have no coordinates.
    pub fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        write_csv_columns(out, &self.space, &["value"], |i| vec![self.values[i]])
    }
}

/// Shared CSV layout for value dumps: index, cell-center coordinates, then `cols`.
pub fn write_csv_columns(
    out: &mut dyn Write,
    space: &StateSpace,
    cols: &[&str],
    row: impl Fn(usize) -> Vec<f64>,
) -> std::io::Result<()> {
    let coords: Vec<String> = (1..=space.dim()).map(|d| format!("x{d}")).collect();
    let mut header = vec!["index".to_string()];
    header.extend(coords);
    header.extend(cols.iter().map(|c| c.to_string()));
    writeln!(out, "{}", header.join(","))?;
    for i in 0..space.len() {
        let mut line = vec![i.to_string()];
        if space.is_grid() {
            line.extend(space.center(i).iter().map(|c| format!("{c}")));
        }
        line.extend(row(i).iter().map(|v| format!("{v}")));
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

fn clamp_unit(values: &mut [f64]) {
    let mut worst: f64 = 0.0;
    for v in values.iter_mut() {
        let c = v.clamp(0.0, 1.0);
        worst = worst.max((c - *v).abs());
        *v = c;
    }
    if worst > CLAMP_WARN {
        log::warn!("clamped a value function entry by {worst:e}");
    }
}

fn check_space(kernel: &MatrixKernel, r: &Region) -> Result<()> {
    if r.space() != kernel.space() && **r.space() != **kernel.space() {
        return Err(Error::SpaceMismatch);
    }
    Ok(())
}

/// `I_A f = 1_A P f`.
pub fn apply_invariance_op(kernel: &MatrixKernel, a: &Region, f: &ValueFn) -> Result<ValueFn> {
    check_space(kernel, a)?;
    if f.len() != kernel.len() {
        return Err(Error::SpaceMismatch);
    }
    let mut values = kernel.apply_masked(f.values(), a.mask());
    clamp_unit(&mut values);
    Ok(ValueFn { space: kernel.space().clone(), values })
}

/// Runs `v_{k+1} = base + 1_keep P v_k` from `v_0 = start` and calls `visit(k, v_k)` for
/// every `k` in `0..=n`. Stops early when `visit` returns false.
pub(crate) fn iterate(
    kernel: &MatrixKernel,
    keep: &[bool],
    base: &[f64],
    start: Vec<f64>,
    n: usize,
    mut visit: impl FnMut(usize, &[f64]) -> bool,
) -> Vec<f64> {
    let mut v = start;
    if !visit(0, &v) {
        return v;
    }
    for k in 1..=n {
        let mut next = kernel.apply_masked(&v, keep);
        for (x, b) in next.iter_mut().zip(base) {
            *x += b;
        }
        clamp_unit(&mut next);
        v = next;
        if !visit(k, &v) {
            break;
        }
    }
    v
}

/// `w_n(.; A, B)`: probability of reaching `B` within `n` steps while staying in `A`.
pub fn bounded_reach_avoid(kernel: &MatrixKernel, a: &Region, b: &Region, n: usize) -> Result<ValueFn> {
    check_space(kernel, a)?;
    check_space(kernel, b)?;
    let avoid = a.difference(b)?;
    let base = ValueFn::indicator(b).into_values();
    let values = iterate(kernel, avoid.mask(), &base, base.clone(), n, |_, _| true);
    Ok(ValueFn { space: kernel.space().clone(), values })
}

/// `u_n(.; A)`: probability of staying in `A` for `n` steps.
pub fn bounded_invariance(kernel: &MatrixKernel, a: &Region, n: usize) -> Result<ValueFn> {
    check_space(kernel, a)?;
    let zero = vec![0.0; kernel.len()];
    let values = iterate(kernel, a.mask(), &zero, ValueFn::indicator(a).into_values(), n, |_, _| true);
    Ok(ValueFn { space: kernel.space().clone(), values })
}

/// Max-norm residual of `w = 1_B + I_{A\B} w`.
pub fn bellman_residual(kernel: &MatrixKernel, a: &Region, b: &Region, w: &ValueFn) -> Result<f64> {
    let avoid = a.difference(b)?;
    let pw = kernel.apply_masked(w.values(), avoid.mask());
    Ok(pw
        .iter()
        .zip(b.mask())
        .zip(w.values())
        .fold(0.0, |m, ((p, &inb), v)| m.max((p + if inb { 1.0 } else { 0.0 } - v).abs())))
}
