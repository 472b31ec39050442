use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by loading data, building indexes and computing metrics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("unsupported layout: {0}")]
    UnsupportedLayout(String),

    #[error("unsupported element type: {0}")]
    UnsupportedElementType(String),

    #[error("expected a 2-D array, got shape {0:?}")]
    NotTwoDimensional(Vec<usize>),

    #[error("non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("k = {k} out of range for {what} (need 1 <= k < {bound})")]
    KOutOfRange {
        k: usize,
        bound: usize,
        what: String,
    },

    #[error("degenerate reference calibration: leave-one-out clipped density of the real set is 0")]
    DegenerateCalibration,

    #[error("unknown metric '{name}' (valid: {valid})")]
    UnknownMetric { name: String, valid: String },

    #[error("unknown scenario '{name}' (valid: {valid})")]
    UnknownScenario { name: String, valid: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn k_range(k: usize, bound: usize, what: impl Into<String>) -> Self {
        Error::KOutOfRange {
            k,
            bound,
            what: what.into(),
        }
    }
}
