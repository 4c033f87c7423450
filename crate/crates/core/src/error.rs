use thiserror::Error;

/// Errors raised by the laboratory.
///
/// Validation failures (bad arguments, bad configuration) are kept apart from
/// numerical failures so the CLI can map them to distinct exit codes.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl LabError {
    /// True for errors caused by user input rather than by the computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            LabError::InvalidArgument(_) | LabError::Config(_) | LabError::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid(msg: impl Into<String>) -> LabError {
    LabError::InvalidArgument(msg.into())
}

pub(crate) fn mismatch(msg: impl Into<String>) -> LabError {
    LabError::DimensionMismatch(msg.into())
}
