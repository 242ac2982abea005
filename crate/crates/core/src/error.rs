use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Two objects that must agree on the number of modes (or vector length) do not.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    /// A parameter lies outside its physical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A click pattern is not valid for the detector model or scheme.
    #[error("invalid click pattern: {0}")]
    InvalidClicks(String),

    /// A normalized quantity was requested from a state with zero trace.
    #[error("state has zero trace")]
    ZeroTrace,

    /// The requested closed form does not cover the given input.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
