use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("zero-norm vector under angular metric")]
    ZeroNorm,

    #[error("malformed input: {0}")]
    Format(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("k = {k} out of range for {available} candidate points")]
    KOutOfRange { k: usize, available: usize },

    #[error("all neighbor distances are zero")]
    AllZeroDistances,

    #[error("need at least 2 positive distances, found {0}")]
    TooFewPositive(usize),

    #[error("invalid parameter `{key}`: {reason}")]
    Param { key: String, reason: String },

    #[error("fingerprint mismatch: expected {expected:016x}, found {found:016x}")]
    FingerprintMismatch { expected: u64, found: u64 },

    #[error("schema violation: {0}")]
    Schema(String),
}

impl Error {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn param(key: &str, reason: impl Into<String>) -> Self {
        Error::Param {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    /// True for failures of the underlying filesystem, as opposed to
    /// content that failed validation.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}
