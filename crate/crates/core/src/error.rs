use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("model/point kind mismatch: {0}")]
    KindMismatch(String),

    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    #[error("path {path} blew up at step {step}")]
    PathBlowup { path: usize, step: usize },

    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),

    #[error("degenerate function: {0}")]
    DegenerateFunction(String),

    #[error("indeterminate ratio: {0}")]
    IndeterminateRatio(String),

    #[error("invalid comparison: {0}")]
    InvalidComparison(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
