use thiserror::Error;

#[derive(Debug, Error)]
pub enum PgmmError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("diagnostic undefined: {0}")]
    Diagnostic(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PgmmError {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        PgmmError::Validation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, PgmmError>;
