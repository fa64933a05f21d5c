use thiserror::Error;

/// Crate-wide error type. Variants map onto the CLI exit codes:
/// validation problems exit 2, degenerate models exit 3, I/O exits 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("collinear columns after fixed-effect absorption: {}", columns.join(", "))]
    Collinear { columns: Vec<String> },

    #[error("degenerate model: {0}")]
    Degenerate(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Process exit code for the CLI front-end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::UndefinedCorrelation(_)
            | Error::Collinear { .. }
            | Error::Parse(_) => 2,
            Error::Degenerate(_) => 3,
            Error::Io(_) | Error::Csv(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
