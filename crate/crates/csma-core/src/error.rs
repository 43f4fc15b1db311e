//! Crate-wide error type.

use thiserror::Error;

/// Errors returned by graph, analysis, optimization, simulation, and oracle
/// operations.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A vector argument does not match the number of links.
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// The problem instance is too large for an exhaustive operation.
    #[error("{what} supports at most {cap}, got {requested}")]
    CapacityExceeded {
        what: &'static str,
        cap: usize,
        requested: usize,
    },

    /// The conflict graph failed validation.
    #[error("invalid conflict graph: {0}")]
    InvalidGraph(String),

    /// A scalar or vector parameter is outside its admissible domain.
    #[error("parameter out of domain: {0}")]
    Domain(String),

    /// A simulation or controller configuration failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The linear-program solver failed.
    #[error("linear program failed: {0}")]
    Solver(String),

    /// The arrival-rate vector is not strictly feasible.
    #[error("arrival rates are not strictly feasible (margin {margin:.3e})")]
    NotStrictlyFeasible { margin: f64 },

    /// Iterative solve did not reach the requested tolerance. Carries the
    /// best iterate found.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
