//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the engine. Variants map one-to-one onto CLI exit
/// codes, so keep the classification stable.
#[derive(Debug, Clone, Error)]
pub enum EngineError {
    /// Bad user input: malformed spec, bounds off the grid, infeasible
    /// constraint systems, inconsistent grids.
    #[error("configuration error: {0}")]
    Config(String),

    /// A value outside the domain of an operation (e.g. a path outside the
    /// price bounds, a table payoff queried off-lattice).
    #[error("domain error: {0}")]
    Domain(String),

    /// A hard cap was exceeded (vertex products, enumeration sizes,
    /// simplex pivots).
    #[error("resource error: {0}")]
    Resource(String),

    /// Inconsistent shapes handed to the LP core.
    #[error("structural error: {0}")]
    Structural(String),

    /// Numerical failure inside the solver.
    #[error("solver failure: {0}")]
    Solver(String),

    /// The lattice market admits arbitrage (or option prices are
    /// inconsistent); pricing operations refuse to run.
    #[error("market not arbitrage-free: {0}")]
    Uncertified(String),
}

impl EngineError {
    pub fn config(msg: impl Into<String>) -> Self {
        EngineError::Config(msg.into())
    }
    pub fn domain(msg: impl Into<String>) -> Self {
        EngineError::Domain(msg.into())
    }
    pub fn resource(msg: impl Into<String>) -> Self {
        EngineError::Resource(msg.into())
    }
    pub fn structural(msg: impl Into<String>) -> Self {
        EngineError::Structural(msg.into())
    }
    pub fn solver(msg: impl Into<String>) -> Self {
        EngineError::Solver(msg.into())
    }
    pub fn uncertified(msg: impl Into<String>) -> Self {
        EngineError::Uncertified(msg.into())
    }
}
