use std::fmt;

use pgmm_core::PgmmError;

/// Process exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Validation,
    Runtime,
    NotConverged,
}

impl ExitKind {
    pub fn code(self) -> u8 {
        match self {
            ExitKind::Validation => 1,
            ExitKind::Runtime => 2,
            ExitKind::NotConverged => 3,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn new(kind: ExitKind, error: impl Into<anyhow::Error>) -> Self {
        CliError {
            kind,
            error: error.into(),
        }
    }

    pub fn validation(msg: impl fmt::Display) -> Self {
        CliError::new(ExitKind::Validation, anyhow::anyhow!("{msg}"))
    }

    pub fn runtime(msg: impl fmt::Display) -> Self {
        CliError::new(ExitKind::Runtime, anyhow::anyhow!("{msg}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl std::error::Error for CliError {}

impl From<PgmmError> for CliError {
    fn from(e: PgmmError) -> Self {
        let kind = match e {
            PgmmError::Parse { .. } | PgmmError::Validation(_) | PgmmError::Domain(_) | PgmmError::UnknownScenario(_) => {
                ExitKind::Validation
            }
            PgmmError::Diagnostic(_) | PgmmError::Io(_) | PgmmError::Csv(_) | PgmmError::Json(_) => ExitKind::Runtime,
        };
        CliError::new(kind, e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
