#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use pctlmc::formula::{Cmp, Formula, PathFormula};
use pctlmc::kernel::MatrixKernel;
use pctlmc::space::{Region, StateSpace};
use rand::Rng;

/// Random stochastic matrix: every row has 1 to 6 successors with weights in
/// [0.2, 1], and roughly one state in thirty is absorbing.
pub fn random_chain(rng: &mut impl Rng, n: usize) -> MatrixKernel {
    let space = Arc::new(StateSpace::finite(n).unwrap());
    let rows = (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            if rng.random_bool(0.03) {
                row[i] = 1.0;
            } else {
                for _ in 0..rng.random_range(1..=6.min(n)) {
                    row[rng.random_range(0..n)] += rng.random_range(0.2..1.0);
                }
            }
            row
        })
        .collect();
    MatrixKernel::normalized(space, rows).unwrap()
}

/// Disjoint `A`, `B` with `A` non-empty.
pub fn random_disjoint(rng: &mut impl Rng, space: &Arc<StateSpace>) -> (Region, Region) {
    let n = space.len();
    let mut a = vec![false; n];
    let mut b = vec![false; n];
    for i in 0..n {
        match rng.random_range(0..10) {
            0..=5 => a[i] = true,
            6..=7 => b[i] = true,
            _ => {}
        }
    }
    a[rng.random_range(0..n)] = true;
    for i in 0..n {
        if a[i] {
            b[i] = false;
        }
    }
    (Region::from_mask(space, a).unwrap(), Region::from_mask(space, b).unwrap())
}

/// A chain with a proper subset `A` that is simple or not, as asked. Simple sets get
/// an escape chain through `A` in random order, so `m(A)` ranges up to `|A|`.
pub fn forced_instance(rng: &mut impl Rng, simple: bool) -> (MatrixKernel, Region) {
    let n = rng.random_range(3..=30);
    let space = Arc::new(StateSpace::finite(n).unwrap());
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let size = rng.random_range(1..n);
    let inside: Vec<usize> = order[..size].to_vec();
    let outside: Vec<usize> = order[size..].to_vec();
    let a = Region::from_indices(&space, inside.iter().copied()).unwrap();
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            if a.contains(i) {
                for _ in 0..rng.random_range(1..=3) {
                    row[inside[rng.random_range(0..size)]] += rng.random_range(0.2..1.0);
                }
            } else {
                for _ in 0..rng.random_range(1..=4) {
                    row[rng.random_range(0..n)] += rng.random_range(0.2..1.0);
                }
            }
            row
        })
        .collect();
    if simple {
        for k in 0..size {
            let next = if k + 1 < size { inside[k + 1] } else { outside[rng.random_range(0..outside.len())] };
            rows[inside[k]][next] += rng.random_range(0.2..1.0);
        }
    } else {
        let s = inside[rng.random_range(0..size)];
        rows[s] = vec![0.0; n];
        rows[s][s] = 1.0;
    }
    (MatrixKernel::normalized(space, rows).unwrap(), a)
}

pub fn random_labels(rng: &mut impl Rng, space: &Arc<StateSpace>) -> BTreeMap<String, Region> {
    ["a", "b", "c"]
        .iter()
        .map(|name| {
            let mask: Vec<bool> = (0..space.len()).map(|_| rng.random_bool(0.5)).collect();
            (name.to_string(), Region::from_mask(space, mask).unwrap())
        })
        .collect()
}

/// Random state formula with at most `depth` nested probability operators.
pub fn random_formula(rng: &mut impl Rng, depth: usize) -> Formula {
    if depth == 0 || rng.random_bool(0.2) {
        return match rng.random_range(0..6) {
            0 => Formula::True,
            1 => Formula::not(random_atom(rng)),
            _ => random_atom(rng),
        };
    }
    match rng.random_range(0..5) {
        0 => Formula::not(random_formula(rng, depth)),
        1 => Formula::and(random_formula(rng, depth - 1), random_formula(rng, depth - 1)),
        _ => {
            let cmp = [Cmp::Lt, Cmp::Le, Cmp::Gt, Cmp::Ge][rng.random_range(0..4)];
            let p = (rng.random_range(0.05..0.95) * 1000.0f64).round() / 1000.0;
            let kind = rng.random_range(0..5);
            let mut sub = || random_formula(rng, depth - 1);
            let path = match kind {
                0 => PathFormula::Next(sub()),
                1 => {
                    let (l, r) = (sub(), sub());
                    PathFormula::BoundedUntil(l, r, 1 + (p * 1000.0) as usize % 10)
                }
                2 => {
                    let (l, r) = (sub(), sub());
                    PathFormula::Until(l, r)
                }
                3 => PathFormula::BoundedGlobally(sub(), 1 + (p * 1000.0) as usize % 8),
                _ => PathFormula::Globally(sub()),
            };
            Formula::prob(cmp, p, path)
        }
    }
}

fn random_atom(rng: &mut impl Rng) -> Formula {
    Formula::atom(["a", "b", "c"][rng.random_range(0..3)])
}

/// `w_n(.; A, B)` by plain repeated multiplication, independent of the engine.
pub fn naive_bounded_reach_avoid(kernel: &MatrixKernel, a: &Region, b: &Region, n: usize) -> Vec<f64> {
    let len = kernel.len();
    let mut w: Vec<f64> = (0..len).map(|i| if b.contains(i) { 1.0 } else { 0.0 }).collect();
    for _ in 0..n {
        w = (0..len)
            .map(|i| {
                if b.contains(i) {
                    1.0
                } else if a.contains(i) {
                    (0..len).map(|j| kernel.prob(i, j) * w[j]).sum()
                } else {
                    0.0
                }
            })
            .collect();
    }
    w
}
