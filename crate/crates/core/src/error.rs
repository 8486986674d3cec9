//! Error taxonomy shared by the whole crate.

use thiserror::Error;

/// Failure modes of body construction, samplers and estimators.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix had the wrong length for the requested operation.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An argument was outside the documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The object is not in the state the operation requires
    /// (e.g. a body that has not been normalized to volume one).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// The exact algorithm is too expensive at the requested size.
    #[error("capacity exceeded: {what} supports sizes up to {limit}, got {requested}; {hint}")]
    Capacity {
        what: &'static str,
        limit: usize,
        requested: usize,
        hint: &'static str,
    },

    /// A descriptor or configuration string could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn state(msg: impl Into<String>) -> Self {
        Error::InvalidState(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
