use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// Input data has the wrong shape, length or content.
    #[error("invalid data: {0}")]
    InvalidData(String),
    /// A numerical procedure failed to reach its goal.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn bad_data(msg: impl Into<String>) -> Error {
    Error::InvalidData(msg.into())
}
