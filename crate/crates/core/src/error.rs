use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid resolution {0} is invalid: must be even and at least 8")]
    InvalidResolution(usize),

    #[error("size mismatch: expected {expected} values, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("vorticity must be mean-free, found mean {0:e}")]
    NonzeroMean(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("integration aborted at t = {t}: {reason}")]
    Aborted { t: f64, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("degenerate constants: {0}")]
    Degenerate(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),

    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
