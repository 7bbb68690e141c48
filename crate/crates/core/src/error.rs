use thiserror::Error;

/// Errors produced by the factorization library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    #[error("numerical failure: {0}")]
    NonFinite(String),

    #[error("parameter error: {0}")]
    Parameter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
