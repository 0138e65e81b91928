//! PCTL syntax: abstract syntax tree, concrete syntax and the nested verification
//! driver.

mod parser;
mod verify;

use std::fmt;

pub use parser::{parse, ParseError};
pub use verify::{verify, verify_partial, Approx, CheckerContext, ThreeValuedSet, TraceEntry, Verification, NUMERIC_SLACK};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    /// Comparator of the complementary probability: `P[~p](G a)` becomes
    /// `P[~' 1-p](true U !a)`.
    pub fn mirror(self) -> Cmp {
        match self {
            Cmp::Lt => Cmp::Gt,
            Cmp::Le => Cmp::Ge,
            Cmp::Gt => Cmp::Lt,
            Cmp::Ge => Cmp::Le,
        }
    }

    /// Lower-bound comparators are monotone increasing in the probability.
    pub fn is_lower_bound(self) -> bool {
        matches!(self, Cmp::Gt | Cmp::Ge)
    }

    pub fn holds(self, value: f64, p: f64) -> bool {
        match self {
            Cmp::Lt => value < p,
            Cmp::Le => value <= p,
            Cmp::Gt => value > p,
            Cmp::Ge => value >= p,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }
}

/// State formula.
#[derive(Clone, Debug, PartialEq)]
pub enum Formula {
    True,
    Atom(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Prob { cmp: Cmp, p: f64, path: Box<PathFormula> },
}

/// Path formula; only ever found directly under [`Formula::Prob`].
#[derive(Clone, Debug, PartialEq)]
pub enum PathFormula {
    Next(Formula),
    BoundedUntil(Formula, Formula, usize),
    Until(Formula, Formula),
    BoundedGlobally(Formula, usize),
    Globally(Formula),
}

impl Formula {
    pub fn atom(name: &str) -> Formula {
        Formula::Atom(name.to_string())
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(l: Formula, r: Formula) -> Formula {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn prob(cmp: Cmp, p: f64, path: PathFormula) -> Formula {
        Formula::Prob { cmp, p, path: Box::new(path) }
    }

    /// Number of nested probability operators on the deepest branch.
    pub fn depth(&self) -> usize {
        match self {
            Formula::True | Formula::Atom(_) => 0,
            Formula::Not(f) => f.depth(),
            Formula::And(l, r) => l.depth().max(r.depth()),
            Formula::Prob { path, .. } => {
                1 + match path.as_ref() {
                    PathFormula::Next(f) | PathFormula::Globally(f) | PathFormula::BoundedGlobally(f, _) => f.depth(),
                    PathFormula::Until(l, r) | PathFormula::BoundedUntil(l, r, _) => l.depth().max(r.depth()),
                }
            }
        }
    }

    /// Atom names in order of first appearance.
    pub fn atoms(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut Vec<String>) {
        match self {
            Formula::True => {}
            Formula::Atom(a) => {
                if !out.contains(a) {
                    out.push(a.clone());
                }
            }
            Formula::Not(f) => f.collect_atoms(out),
            Formula::And(l, r) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
            Formula::Prob { path, .. } => match path.as_ref() {
                PathFormula::Next(f) | PathFormula::Globally(f) | PathFormula::BoundedGlobally(f, _) => {
                    f.collect_atoms(out)
                }
                PathFormula::Until(l, r) | PathFormula::BoundedUntil(l, r, _) => {
                    l.collect_atoms(out);
                    r.collect_atoms(out);
                }
            },
        }
    }
}

// 1 - p printed back as the short decimal a user would have written
fn complement_prob(p: f64) -> f64 {
    ((1.0 - p) * 1e12).round() / 1e12
}

/// Rewrites every invariance operator into until form, recursively.
pub fn desugar_invariance(f: &Formula) -> Formula {
    match f {
        Formula::True | Formula::Atom(_) => f.clone(),
        Formula::Not(g) => Formula::not(desugar_invariance(g)),
        Formula::And(l, r) => Formula::and(desugar_invariance(l), desugar_invariance(r)),
        Formula::Prob { cmp, p, path } => match path.as_ref() {
            PathFormula::Next(g) => Formula::prob(*cmp, *p, PathFormula::Next(desugar_invariance(g))),
            PathFormula::Until(l, r) => {
                Formula::prob(*cmp, *p, PathFormula::Until(desugar_invariance(l), desugar_invariance(r)))
            }
            PathFormula::BoundedUntil(l, r, n) => Formula::prob(
                *cmp,
                *p,
                PathFormula::BoundedUntil(desugar_invariance(l), desugar_invariance(r), *n),
            ),
            PathFormula::Globally(g) => Formula::prob(
                cmp.mirror(),
                complement_prob(*p),
                PathFormula::Until(Formula::True, Formula::not(desugar_invariance(g))),
            ),
            PathFormula::BoundedGlobally(g, n) => Formula::prob(
                cmp.mirror(),
                complement_prob(*p),
                PathFormula::BoundedUntil(Formula::True, Formula::not(desugar_invariance(g)), *n),
            ),
        },
    }
}

impl fmt::Display for Cmp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

fn fmt_operand(f: &mut fmt::Formatter<'_>, g: &Formula) -> fmt::Result {
    match g {
        Formula::And(..) => write!(f, "({g})"),
        _ => write!(f, "{g}"),
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::Atom(a) => f.write_str(a),
            Formula::Not(g) => {
                f.write_str("!")?;
                fmt_operand(f, g)
            }
            Formula::And(l, r) => {
                write!(f, "{l} & ")?;
                fmt_operand(f, r)
            }
            Formula::Prob { cmp, p, path } => write!(f, "P[{cmp}{p}]({path})"),
        }
    }
}

impl fmt::Display for PathFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathFormula::Next(g) => {
                f.write_str("X ")?;
                fmt_operand(f, g)
            }
            PathFormula::Globally(g) => {
                f.write_str("G ")?;
                fmt_operand(f, g)
            }
            PathFormula::BoundedGlobally(g, n) => {
                write!(f, "G<={n} ")?;
                fmt_operand(f, g)
            }
            PathFormula::Until(l, r) => {
                fmt_operand(f, l)?;
                f.write_str(" U ")?;
                fmt_operand(f, r)
            }
            PathFormula::BoundedUntil(l, r, n) => {
                fmt_operand(f, l)?;
                write!(f, " U<={n} ")?;
                fmt_operand(f, r)
            }
        }
    }
}
