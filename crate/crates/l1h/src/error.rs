//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by solver, oracle, and I/O entry points.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Vector or matrix sizes do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// Problem-file text could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// A brute-force enumeration would exceed its combination budget.
    #[error("enumeration budget exceeded: {0}")]
    Capacity(String),
    /// The line search exhausted its trial budget without accepting a step.
    #[error("line search failed to accept a step within {max_steps} trials")]
    LineSearchFailed { max_steps: usize },
    /// An exhaustive oracle could not certify any candidate.
    #[error("oracle failure: {0}")]
    OracleFailure(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
