use thiserror::Error;

use crate::formula::ParseError;
use crate::space::Region;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state space: {0}")]
    InvalidSpace(String),

    #[error("regions live on different state spaces")]
    SpaceMismatch,

    #[error("box {requested:?} lies outside the grid bounds {bounds:?}")]
    BoxOutOfBounds {
        requested: Vec<(f64, f64)>,
        bounds: Vec<(f64, f64)>,
    },

    #[error("operation requires a grid space")]
    NotAGrid,

    #[error("point has dimension {got}, kernel expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("row {row} is not a probability vector: {reason}")]
    NotStochastic { row: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature did not reach tolerance {tolerance:e} (estimated error {estimate:e})")]
    Quadrature { tolerance: f64, estimate: f64 },

    #[error("contraction factor rho = {0} is not below 1")]
    NotContractive(f64),

    #[error(
        "no contraction certificate for the avoid set within m_max = {m_max} \
         ({} cells); the set is possibly non-simple",
        .region.count()
    )]
    NonContractive { region: Region, m_max: usize },

    #[error("kernel family does not expose its support geometry")]
    UnknownSupport,

    #[error("excessive candidate is negative ({value}) at sampled point {point:?}")]
    NegativeCandidate { point: Vec<f64>, value: f64 },

    #[error("locally excessive candidate has not been verified")]
    UnverifiedCandidate,

    #[error("linear system is singular (residual {residual:e}); absorbing-set excision failed")]
    SingularSystem { residual: f64 },

    #[error("atom `{0}` is not bound to a region")]
    UnboundAtom(String),

    #[error("requested precision {requested} is unavailable: best certified error is {achieved}")]
    PrecisionUnavailable { requested: f64, achieved: f64 },

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("no Lipschitz constant or per-step error supplied for the abstraction")]
    MissingLambda,

    #[error(transparent)]
    Parse(#[from] ParseError),
}

impl Error {
    /// The question is well posed but the available bounds cannot settle it.
    pub fn is_undecidable(&self) -> bool {
        matches!(
            self,
            Error::Inconclusive(_) | Error::PrecisionUnavailable { .. } | Error::NonContractive { .. } | Error::UnknownSupport
        )
    }
}
