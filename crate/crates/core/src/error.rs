use thiserror::Error;

/// Errors produced by the signal-path and analysis operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor argument is outside its documented domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Matrix/stream dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A stream is too short for the requested operation.
    #[error("input stream too short: need at least {needed} samples, got {got}")]
    StreamTooShort { needed: usize, got: usize },

    /// Equalization was requested for symbols without enough context.
    #[error("insufficient context: {0}")]
    InsufficientContext(String),

    /// A noise PSD table does not cover the band required by the sample rate.
    #[error("PSD table covers up to {table_max_hz} Hz but Nyquist is {nyquist_hz} Hz")]
    PsdCoverage { table_max_hz: f64, nyquist_hz: f64 },

    /// A filter design could not meet its response tolerance.
    #[error("shaping filter with {num_taps} taps misses the target response: {achieved_db:.3} dB > {required_db:.3} dB")]
    ShapingTolerance {
        num_taps: usize,
        achieved_db: f64,
        required_db: f64,
    },

    /// Sample rates of two inputs disagree.
    #[error("sample-rate mismatch: {left_hz} Hz vs {right_hz} Hz")]
    SampleRateMismatch { left_hz: f64, right_hz: f64 },

    /// A numeric input violates a sign/positivity contract.
    #[error("invalid value: {0}")]
    InvalidValue(String),

    /// Malformed text in a file being imported.
    #[error("parse error in {what} (line {line}): {reason}")]
    Parse {
        what: &'static str,
        line: usize,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
