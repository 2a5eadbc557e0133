use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A record or attestation violated the reward-record schema.
    #[error("schema error in `{field}`: {reason}")]
    Schema { field: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("class `{class}` has {have} samples, need at least {need}")]
    InsufficientClass { class: String, have: usize, need: usize },

    #[error("label scheme mismatch: {0}")]
    SchemeMismatch(String),

    #[error("class registry mismatch: {0}")]
    ClassMismatch(String),

    #[error("numeric failure at epoch {epoch}: {detail}")]
    NumericFailure { epoch: usize, detail: String },

    #[error("line {line} (byte offset {offset}): {reason}")]
    Malformed { line: usize, offset: u64, reason: String },

    #[error("incompatible file: {0}")]
    Incompatible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn schema(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the numeric core (diverged training, non-finite values).
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NumericFailure { .. })
    }
}
