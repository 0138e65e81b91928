use std::sync::Arc;

use serde::Serialize;

use super::{desugar_invariance, Cmp, Formula, PathFormula};
use crate::engine::ValueFn;
use crate::error::{Error, Result};
use crate::space::{Region, StateSpace};

/// Errors below this are rounding noise and do not count against the requested
/// precision.
pub const NUMERIC_SLACK: f64 = 1e-9;

/// Inner and outer approximation of a satisfaction set.
#[derive(Clone, Debug, PartialEq)]
pub struct ThreeValuedSet {
    pub sub: Region,
    pub sup: Region,
}

impl ThreeValuedSet {
    pub fn exact(r: Region) -> Self {
        ThreeValuedSet { sub: r.clone(), sup: r }
    }

    pub fn undecided(&self) -> Region {
        self.sup.difference(&self.sub).expect("sub and super share a space")
    }
}

/// A value function together with a sup-norm bound on its error.
#[derive(Clone, Debug)]
pub struct Approx {
    pub values: ValueFn,
    pub error: f64,
    /// Per-state bounds, when sharper than `error`. States whose bound exceeds the
    /// requested precision are left undecided instead of failing the formula.
    pub cell_error: Option<Vec<f64>>,
    /// Free-form record of how the bound was obtained, embedded in reports.
    pub details: serde_json::Value,
    /// Set when the bound rests on an unverified absorbing-set candidate.
    pub conditional: bool,
}

impl Approx {
    pub fn exact(values: ValueFn) -> Self {
        Approx { values, error: 0.0, cell_error: None, details: serde_json::Value::Null, conditional: false }
    }
}

/// Value-function oracle for one model.
pub trait CheckerContext: Sync {
    fn space(&self) -> &Arc<StateSpace>;

    fn atom(&self, name: &str) -> Result<Region>;

    /// `P(x, R)`.
    fn next_prob(&self, r: &Region, delta: f64) -> Result<Approx>;

    /// `w_n(.; A, B)`.
    fn bounded_until(&self, a: &Region, b: &Region, n: usize, delta: f64) -> Result<Approx>;

    /// `w(.; A, B)`.
    fn until(&self, a: &Region, b: &Region, delta: f64) -> Result<Approx>;
}

/// Per-subformula record, listed children first.
#[derive(Clone, Debug, Serialize)]
pub struct TraceEntry {
    pub formula: String,
    pub sub_count: usize,
    pub super_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sub_mask: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub super_mask: Option<Vec<usize>>,
    /// Largest value-function error used at this level.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<serde_json::Value>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub conditional: bool,
    /// Why the value could not be bounded; the entry is then fully undecided.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unresolved: Option<String>,
    #[serde(skip)]
    pub sets: ThreeValuedSet,
}

#[derive(Clone, Debug)]
pub struct Verification {
    pub sets: ThreeValuedSet,
    pub trace: Vec<TraceEntry>,
}

impl Verification {
    pub fn is_resolved(&self) -> bool {
        self.trace.iter().all(|t| t.unresolved.is_none())
    }
}

/// Bottom-up evaluation of `formula`, returning sets `sub ⊆ Sat ⊆ sup` provided the
/// context honours its error bounds.
pub fn verify(formula: &Formula, ctx: &dyn CheckerContext, delta: f64) -> Result<Verification> {
    run(formula, ctx, delta, false)
}

/// Like [`verify`], but a probability subformula whose value cannot be bounded
/// (inconclusive, non-contractive or too imprecise) becomes fully undecided
/// (`sub = {}`, `sup = X`) and evaluation continues.
pub fn verify_partial(formula: &Formula, ctx: &dyn CheckerContext, delta: f64) -> Result<Verification> {
    run(formula, ctx, delta, true)
}

fn run(formula: &Formula, ctx: &dyn CheckerContext, delta: f64, lenient: bool) -> Result<Verification> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!("delta must lie in [0,1), got {delta}")));
    }
    let f = desugar_invariance(formula);
    let mut trace = Vec::new();
    let sets = eval(&f, ctx, delta, lenient, &mut trace)?;
    Ok(Verification { sets, trace })
}

fn record(trace: &mut Vec<TraceEntry>, f: &Formula, sets: &ThreeValuedSet, approx: &[&Approx]) {
    let error = if approx.is_empty() { None } else { Some(approx.iter().fold(0.0f64, |m, a| m.max(a.error))) };
    trace.push(TraceEntry {
        formula: f.to_string(),
        sub_count: sets.sub.count(),
        super_count: sets.sup.count(),
        sub_mask: None,
        super_mask: None,
        error,
        details: approx.iter().filter(|a| !a.details.is_null()).map(|a| a.details.clone()).collect(),
        conditional: approx.iter().any(|a| a.conditional),
        unresolved: None,
        sets: sets.clone(),
    });
}

fn eval(f: &Formula, ctx: &dyn CheckerContext, delta: f64, lenient: bool, trace: &mut Vec<TraceEntry>) -> Result<ThreeValuedSet> {
    let sets = match f {
        Formula::True => ThreeValuedSet::exact(Region::full(ctx.space())),
        Formula::Atom(name) => {
            let r = ctx.atom(name)?;
            if !r.same_space(&Region::empty(ctx.space())) {
                return Err(Error::SpaceMismatch);
            }
            ThreeValuedSet::exact(r)
        }
        Formula::Not(g) => {
            let c = eval(g, ctx, delta, lenient, trace)?;
            ThreeValuedSet { sub: c.sup.complement(), sup: c.sub.complement() }
        }
        Formula::And(l, r) => {
            let a = eval(l, ctx, delta, lenient, trace)?;
            let b = eval(r, ctx, delta, lenient, trace)?;
            ThreeValuedSet { sub: a.sub.intersect(&b.sub)?, sup: a.sup.intersect(&b.sup)? }
        }
        Formula::Prob { cmp, p, path } => {
            let (lo_args, hi_args) = match path.as_ref() {
                PathFormula::Next(g) => {
                    let c = eval(g, ctx, delta, lenient, trace)?;
                    (Args::Next(c.sub), Args::Next(c.sup))
                }
                PathFormula::Until(l, r) | PathFormula::BoundedUntil(l, r, _) => {
                    let a = eval(l, ctx, delta, lenient, trace)?;
                    let b = eval(r, ctx, delta, lenient, trace)?;
                    let n = match path.as_ref() {
                        PathFormula::BoundedUntil(_, _, n) => Some(*n),
                        _ => None,
                    };
                    (Args::Until(a.sub, b.sub, n), Args::Until(a.sup, b.sup, n))
                }
                PathFormula::Globally(_) | PathFormula::BoundedGlobally(..) => {
                    unreachable!("invariance is desugared before evaluation")
                }
            };
            // the value is monotone in the argument sets: evaluating on the inner
            // sets gives a lower function, on the outer sets an upper one
            let values = || -> Result<(Approx, Approx)> {
                let (lo, hi) = rayon::join(|| lo_args.run(ctx, delta), || hi_args.run(ctx, delta));
                let (lo, hi) = (lo?, hi?);
                for a in [&lo, &hi] {
                    if a.cell_error.is_none() && a.error > delta + NUMERIC_SLACK {
                        return Err(Error::PrecisionUnavailable { requested: delta, achieved: a.error });
                    }
                }
                Ok((lo, hi))
            };
            let (lo, hi) = match values() {
                Ok(v) => v,
                Err(e) if lenient && e.is_undecidable() => {
                    let sets = ThreeValuedSet { sub: Region::empty(ctx.space()), sup: Region::full(ctx.space()) };
                    record(trace, f, &sets, &[]);
                    trace.last_mut().expect("just recorded").unresolved = Some(e.to_string());
                    return Ok(sets);
                }
                Err(e) => return Err(e),
            };
            let sets = threshold(*cmp, *p, delta, &lo, &hi);
            record(trace, f, &sets, &[&lo, &hi]);
            return Ok(sets);
        }
    };
    record(trace, f, &sets, &[]);
    Ok(sets)
}

enum Args {
    Next(Region),
    Until(Region, Region, Option<usize>),
}

impl Args {
    fn run(&self, ctx: &dyn CheckerContext, delta: f64) -> Result<Approx> {
        match self {
            Args::Next(r) => ctx.next_prob(r, delta),
            Args::Until(a, b, Some(n)) => ctx.bounded_until(a, b, *n, delta),
            Args::Until(a, b, None) => ctx.until(a, b, delta),
        }
    }
}

// `lo` is evaluated on the inner argument sets and `hi` on the outer ones.
fn threshold(cmp: Cmp, p: f64, delta: f64, lo: &Approx, hi: &Approx) -> ThreeValuedSet {
    let margin = |a: &Approx, i: usize| delta.max(a.cell_error.as_ref().map_or(a.error, |e| e[i]));
    let space = lo.values.space();
    let (l, h) = (lo.values.values(), hi.values.values());
    if cmp.is_lower_bound() {
        let sub = Region::from_predicate(space, |i| cmp.holds(l[i], p + margin(lo, i)));
        let sup = Region::from_predicate(space, |i| h[i] >= p - margin(hi, i));
        ThreeValuedSet { sub, sup }
    } else {
        let sub = Region::from_predicate(space, |i| cmp.holds(h[i], p - margin(hi, i)));
        let sup = Region::from_predicate(space, |i| l[i] <= p + margin(lo, i));
        ThreeValuedSet { sub, sup }
    }
}
