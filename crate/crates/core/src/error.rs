use thiserror::Error;

/// Errors raised by the analytic and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Argument outside the domain where the formula or sampler is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// Structurally invalid input (malformed excursion, tree, sample...).
    #[error("invalid input: {0}")]
    Invalid(String),
    /// A conditioning event had no realisation (e.g. extinct population).
    #[error("conditioning event not met: {0}")]
    Condition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
