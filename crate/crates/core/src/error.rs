use thiserror::Error;

/// Errors raised by model configuration and evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("frame length {0} is not 256")]
    FrameLength(usize),

    #[error("centre frequency {f0} Hz is at or above Nyquist for {rate} S/s")]
    AboveNyquist { f0: f64, rate: f64 },

    #[error("training did not converge after {sessions} sessions")]
    TrainingFailed { sessions: u32 },

    #[error("scenario: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
