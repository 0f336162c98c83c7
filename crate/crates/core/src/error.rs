use thiserror::Error;

/// Errors raised by model construction, evaluation and sampling.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("sampler initialization failed: {0}")]
    Initialization(String),
    #[error("statistic requires at least two chains")]
    RequiresMultipleChains,
    #[error("chain for `{0}` has zero variance")]
    DegenerateChain(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
