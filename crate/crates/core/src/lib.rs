//! PCTL model checking for discrete-time Markov processes on finite and
//! grid-discretized state spaces, with certified bounds for infinite-horizon
//! until and invariance.

pub mod absorbing;
pub mod checker;
pub mod cli;
pub mod decompose;
pub mod discretize;
pub mod engine;
pub mod error;
pub mod formula;
pub mod horizon;
pub mod kernel;
pub mod mclinear;
pub mod montecarlo;
pub mod space;

pub use error::{Error, Result};
