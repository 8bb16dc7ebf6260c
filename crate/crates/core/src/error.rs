use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported order {order}: {reason}")]
    UnsupportedOrder { order: usize, reason: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("dark frame: calibration image has no positive open element")]
    DarkFrame,

    #[error("dead element at ({row}, {col}): calibrated code is zero at an open mask position")]
    DeadElement { row: usize, col: usize },

    #[error("coding matrix is singular or ill-conditioned (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{message}")]
    Data { message: String },

    #[error("nothing to report")]
    NothingToReport,

    #[error("need at least 2 finite samples, got {0}")]
    TooFewSamples(usize),

    #[error("trial {trial} at k={k}: {source}")]
    Trial {
        k: f64,
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn mismatch(expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// True for filesystem failures, which the CLI maps to its own exit code.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Trial { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
