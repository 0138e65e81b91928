//! State spaces and measurable sets over them.
//!
//! A finite space is a set of state indices `0..count`. A grid space is a uniform
//! partition of a 1D interval or a 2D box into cells, indexed with the first axis
//! varying fastest. Measurable sets are represented as [`Region`]s: membership masks
//! over the index set, so every region on a grid is a union of whole cells.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One axis of a grid: the interval `[lo, hi]` split into `cells` equal cells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::InvalidSpace(format!("degenerate axis [{lo}, {hi}]")));
        }
        if cells == 0 {
            return Err(Error::InvalidSpace("axis needs at least one cell".into()));
        }
        Ok(Axis { lo, hi, cells })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn center(&self, k: usize) -> f64 {
        self.lo + (k as f64 + 0.5) * self.width()
    }

    /// Edge `k` of the partition, `0 <= k <= cells`.
    pub fn edge(&self, k: usize) -> f64 {
        if k == self.cells {
            self.hi
        } else {
            self.lo + k as f64 * self.width()
        }
    }

    /// Cell holding `x` under the closed-open convention; the upper bound belongs
    /// to the last cell.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo && x <= self.hi) {
            return None;
        }
        let k = ((x - self.lo) / self.width()).floor() as usize;
        Some(k.min(self.cells - 1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateSpace {
    Finite { count: usize },
    Grid { axes: Vec<Axis> },
}

impl StateSpace {
    pub fn finite(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidSpace("finite space needs at least one state".into()));
        }
        Ok(StateSpace::Finite { count })
    }

    pub fn grid(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidSpace(format!(
                "grids must have dimension 1 or 2, got {}",
                axes.len()
            )));
        }
        for a in &axes {
            Axis::new(a.lo, a.hi, a.cells)?;
        }
        Ok(StateSpace::Grid { axes })
    }

    pub fn grid_1d(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        Self::grid(vec![Axis::new(lo, hi, cells)?])
    }

    pub fn grid_2d(x: (f64, f64, usize), y: (f64, f64, usize)) -> Result<Self> {
        Self::grid(vec![Axis::new(x.0, x.1, x.2)?, Axis::new(y.0, y.1, y.2)?])
    }

    /// Number of states or cells.
    pub fn len(&self) -> usize {
        match self {
            StateSpace::Finite { count } => *count,
            StateSpace::Grid { axes } => axes.iter().map(|a| a.cells).product(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_grid(&self) -> bool {
        matches!(self, StateSpace::Grid { .. })
    }

    /// Spatial dimension; 0 for finite spaces.
    pub fn dim(&self) -> usize {
        match self {
            StateSpace::Finite { .. } => 0,
            StateSpace::Grid { axes } => axes.len(),
        }
    }

    pub fn axes(&self) -> Result<&[Axis]> {
        match self {
            StateSpace::Grid { axes } => Ok(axes),
            StateSpace::Finite { .. } => Err(Error::NotAGrid),
        }
    }

    fn unravel(axes: &[Axis], i: usize) -> [usize; 2] {
        match axes.len() {
            1 => [i, 0],
            _ => [i % axes[0].cells, i / axes[0].cells],
        }
    }

    /// Center point of cell `i`. Panics on finite spaces.
    pub fn center(&self, i: usize) -> Vec<f64> {
        let axes = self.axes().expect("cell centers exist only on grids");
        let k = Self::unravel(axes, i);
        axes.iter().enumerate().map(|(d, a)| a.center(k[d])).collect()
    }

    /// Per-axis closed bounds of cell `i`. Panics on finite spaces.
    pub fn cell_bounds(&self, i: usize) -> Vec<(f64, f64)> {
        let axes = self.axes().expect("cell bounds exist only on grids");
        let k = Self::unravel(axes, i);
        axes.iter()
            .enumerate()
            .map(|(d, a)| (a.edge(k[d]), a.edge(k[d] + 1)))
            .collect()
    }

    /// Corners of cell `i` (2 in 1D, 4 in 2D).
    pub fn cell_corners(&self, i: usize) -> Vec<Vec<f64>> {
        let b = self.cell_bounds(i);
        match b.len() {
            1 => vec![vec![b[0].0], vec![b[0].1]],
            _ => vec![
                vec![b[0].0, b[1].0],
                vec![b[0].1, b[1].0],
                vec![b[0].0, b[1].1],
                vec![b[0].1, b[1].1],
            ],
        }
    }

    pub fn cell_of_point(&self, x: &[f64]) -> Option<usize> {
        let axes = self.axes().ok()?;
        if x.len() != axes.len() {
            return None;
        }
        let mut idx = 0;
        let mut stride = 1;
        for (a, &xi) in axes.iter().zip(x) {
            idx += a.cell_of(xi)? * stride;
            stride *= a.cells;
        }
        Some(idx)
    }

    /// Largest cell diameter (Euclidean).
    pub fn max_cell_diameter(&self) -> f64 {
        match self {
            StateSpace::Finite { .. } => 0.0,
            StateSpace::Grid { axes } => axes.iter().map(|a| a.width().powi(2)).sum::<f64>().sqrt(),
        }
    }

    pub fn bounds(&self) -> Result<Vec<(f64, f64)>> {
        Ok(self.axes()?.iter().map(|a| (a.lo, a.hi)).collect())
    }
}

impl fmt::Display for StateSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpace::Finite { count } => write!(f, "finite({count})"),
            StateSpace::Grid { axes } => {
                write!(f, "grid(")?;
                for (d, a) in axes.iter().enumerate() {
                    if d > 0 {
                        write!(f, " x ")?;
                    }
                    write!(f, "[{}, {}]/{}", a.lo, a.hi, a.cells)?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A measurable set: a membership mask over the index set of a state space.
#[derive(Clone, Debug)]
pub struct Region {
    space: Arc<StateSpace>,
    mask: Vec<bool>,
}

impl PartialEq for Region {
    fn eq(&self, other: &Self) -> bool {
        self.same_space(other) && self.mask == other.mask
    }
}

impl Eq for Region {}

/// Serialized as the ascending list of member indices.
impl Serialize for Region {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.indices())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetOp {
    Union,
    Intersect,
    Difference,
}

impl Region {
    pub fn empty(space: &Arc<StateSpace>) -> Self {
        Region { space: space.clone(), mask: vec![false; space.len()] }
    }

    pub fn full(space: &Arc<StateSpace>) -> Self {
        Region { space: space.clone(), mask: vec![true; space.len()] }
    }

    pub fn from_mask(space: &Arc<StateSpace>, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != space.len() {
            return Err(Error::InvalidArgument(format!(
                "mask has {} entries, space has {}",
                mask.len(),
                space.len()
            )));
        }
        Ok(Region { space: space.clone(), mask })
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(space: &Arc<StateSpace>, indices: I) -> Result<Self> {
        let mut r = Region::empty(space);
        for i in indices {
            if i >= r.mask.len() {
                return Err(Error::InvalidArgument(format!(
                    "index {i} outside space of size {}",
                    r.mask.len()
                )));
            }
            r.mask[i] = true;
        }
        Ok(r)
    }

    pub fn from_predicate(space: &Arc<StateSpace>, f: impl Fn(usize) -> bool) -> Self {
        Region { space: space.clone(), mask: (0..space.len()).map(f).collect() }
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask[i]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn is_full(&self) -> bool {
        self.mask.iter().all(|&b| b)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn same_space(&self, other: &Region) -> bool {
        Arc::ptr_eq(&self.space, &other.space) || *self.space == *other.space
    }

    fn check(&self, other: &Region) -> Result<()> {
        if self.same_space(other) {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }

    fn zip_with(&self, other: &Region, f: impl Fn(bool, bool) -> bool) -> Result<Region> {
        self.check(other)?;
        Ok(Region {
            space: self.space.clone(),
            mask: self.mask.iter().zip(&other.mask).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn apply(&self, other: &Region, op: SetOp) -> Result<Region> {
        match op {
            SetOp::Union => self.zip_with(other, |a, b| a || b),
            SetOp::Intersect => self.zip_with(other, |a, b| a && b),
            SetOp::Difference => self.zip_with(other, |a, b| a && !b),
        }
    }

    pub fn union(&self, other: &Region) -> Result<Region> {
        self.apply(other, SetOp::Union)
    }

    pub fn intersect(&self, other: &Region) -> Result<Region> {
        self.apply(other, SetOp::Intersect)
    }

    pub fn difference(&self, other: &Region) -> Result<Region> {
        self.apply(other, SetOp::Difference)
    }

    pub fn complement(&self) -> Region {
        Region { space: self.space.clone(), mask: self.mask.iter().map(|b| !b).collect() }
    }

    pub fn is_subset(&self, other: &Region) -> Result<bool> {
        self.check(other)?;
        Ok(self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b))
    }
}

/// Cells of `space` whose center lies in `bx` (closed-open per axis).
pub fn region_from_box(space: &Arc<StateSpace>, bx: &[(f64, f64)]) -> Result<Region> {
    let axes = space.axes()?;
    if bx.len() != axes.len() {
        return Err(Error::DimensionMismatch { expected: axes.len(), got: bx.len() });
    }
    let outside = axes.iter().zip(bx).any(|(a, &(lo, hi))| {
        let slack = 1e-12 * (a.hi - a.lo);
        !(lo < hi) || lo < a.lo - slack || hi > a.hi + slack
    });
    if outside {
        return Err(Error::BoxOutOfBounds {
            requested: bx.to_vec(),
            bounds: axes.iter().map(|a| (a.lo, a.hi)).collect(),
        });
    }
    Ok(Region::from_predicate(space, |i| {
        space.center(i).iter().zip(bx).all(|(&c, &(lo, hi))| c >= lo && c < hi)
    }))
}
