use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("consistency check failed for {quantity}: {detail}")]
    ConsistencyFailure { quantity: String, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
