//! Largest absorbing subsets and simplicity checks.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{CellKernel, MatrixKernel, PointKernel, ROW_SUM_SLACK};
use crate::space::Region;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// The largest absorbing subset is empty.
    Simple,
    NonSimple,
    /// Neither could be established; `las` holds a superset candidate.
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct AbsorbingReport {
    pub las: Region,
    pub verdict: Verdict,
    pub iterations: usize,
    pub delta_used: f64,
}

fn shrink_step(kernel: &dyn CellKernel, current: &Region, threshold: f64) -> Region {
    Region::from_predicate(current.space(), |i| current.contains(i) && kernel.prob_to_region(i, current) >= threshold)
}

/// Greatest fixpoint of `A_{k+1} = {x in A : P(x, A_k) = 1}` on a finite chain.
pub fn las_finite(kernel: &MatrixKernel, a: &Region) -> AbsorbingReport {
    let mut current = a.clone();
    let mut iterations = 0;
    loop {
        let next = shrink_step(kernel, &current, 1.0 - ROW_SUM_SLACK);
        iterations += 1;
        if next == current {
            break;
        }
        current = next;
    }
    let verdict = if current.is_empty() { Verdict::Simple } else { Verdict::NonSimple };
    AbsorbingReport { las: current, verdict, iterations, delta_used: 0.0 }
}

/// The same set computed on the transition graph: repeatedly drop states with an
/// edge leaving the current set (the CTL set `AG A`).
pub fn las_graph(kernel: &MatrixKernel, a: &Region) -> Region {
    let preds = kernel.predecessors();
    let mut inside = a.mask().to_vec();
    let mut queue: VecDeque<usize> = VecDeque::new();
    for i in a.indices() {
        if kernel.row(i).any(|(j, _)| !inside[j]) {
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        if !inside[i] {
            continue;
        }
        inside[i] = false;
        for &p in &preds[i] {
            if inside[p] {
                queue.push_back(p);
            }
        }
    }
    Region::from_mask(a.space(), inside).expect("mask length matches")
}

/// Supersatisfaction iteration `A*_{k+1} = {x in A*_k : P(x, A*_k) >= 1 - delta}`.
/// An empty iterate proves simplicity; anything else is inconclusive.
pub fn an_sequence_approx(kernel: &dyn CellKernel, a: &Region, delta: f64, n_max: usize) -> Result<AbsorbingReport> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!("delta must lie in [0,1), got {delta}")));
    }
    let mut current = a.clone();
    let mut iterations = 0;
    while iterations < n_max && !current.is_empty() {
        let next = shrink_step(kernel, &current, 1.0 - delta);
        iterations += 1;
        if next == current {
            break;
        }
        current = next;
    }
    let verdict = if current.is_empty() { Verdict::Simple } else { Verdict::Inconclusive };
    Ok(AbsorbingReport { las: current, verdict, iterations, delta_used: delta })
}

/// Simplicity from the support of the density: with full support everywhere but at
/// absorbing points, the largest absorbing subset of a bounded `A` is the set of
/// cells holding absorbing points.
pub fn simplicity_by_support(kernel: &dyn PointKernel, a: &Region) -> Result<AbsorbingReport> {
    let space = a.space();
    if !space.is_grid() {
        return Err(Error::NotAGrid);
    }
    let mut las = Region::empty(space);
    for p in kernel.absorbing_points() {
        if let Some(i) = space.cell_of_point(&p) {
            if a.contains(i) {
                las = las.union(&Region::from_indices(space, [i])?)?;
            }
        }
    }
    for i in a.indices().filter(|&i| !las.contains(i)) {
        match kernel.full_support(&space.center(i)) {
            None => return Err(Error::UnknownSupport),
            Some(true) => {}
            Some(false) => {
                return Ok(AbsorbingReport { las: a.clone(), verdict: Verdict::Inconclusive, iterations: 0, delta_used: 0.0 })
            }
        }
    }
    let verdict = if las.is_empty() { Verdict::Simple } else { Verdict::NonSimple };
    Ok(AbsorbingReport { las, verdict, iterations: 0, delta_used: 0.0 })
}

/// `max_{i in A}` of the shortest-path length from `i` to the complement of `A`;
/// `None` when some state of `A` cannot leave it.
pub fn m_upper_bound_graph(kernel: &MatrixKernel, a: &Region) -> Option<usize> {
    let preds = kernel.predecessors();
    let mut dist: Vec<Option<usize>> = a.mask().iter().map(|&inside| if inside { None } else { Some(0) }).collect();
    let mut queue: VecDeque<usize> = (0..kernel.len()).filter(|&i| !a.contains(i)).collect();
    while let Some(j) = queue.pop_front() {
        let d = dist[j].expect("queued states have a distance");
        for &i in &preds[j] {
            if dist[i].is_none() {
                dist[i] = Some(d + 1);
                queue.push_back(i);
            }
        }
    }
    a.indices().try_fold(0, |m, i| dist[i].map(|d| m.max(d)))
}
