use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed CSV at row {row}: {message}")]
    Csv {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("row {row}: expected {expected} cells, found {found}")]
    Arity {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, column '{column}': {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema: {0}")]
    Schema(String),

    #[error("duplicate label columns '{first}' and '{second}'")]
    DuplicateLabel { first: String, second: String },

    #[error("no samples")]
    NoSamples,

    #[error("no feature columns")]
    NoFeatures,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("attribute index {index} out of range for {count} features")]
    AttributeOutOfRange { index: usize, count: usize },

    #[error("nominal feature '{0}' cannot take injected outliers")]
    NominalInjection(String),

    #[error("both classes must be present")]
    SingleClass,

    #[error("no ground-truth outliers")]
    NoOutliers,

    #[error("empty input")]
    EmptyInput,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("cannot coarsen a view with a single ball")]
    SingleBall,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
