use thiserror::Error;

/// Errors raised by the detection pipeline and its building blocks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DdsbError {
    /// A tunable is outside the range the operation accepts.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// Input data (frames, masks, sequences) violates a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// An internal stage produced something a later stage cannot consume.
    #[error("pipeline error: {0}")]
    Pipeline(String),
}

pub type Result<T> = std::result::Result<T, DdsbError>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(DdsbError::InvalidParameter(msg.into()))
}

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(DdsbError::InvalidInput(msg.into()))
}
