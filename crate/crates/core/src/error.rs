use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, AdsError>;

#[derive(Debug, Error)]
pub enum AdsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("index {index} out of range for {len} individuals")]
    Index { index: usize, len: usize },

    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),

    #[error("parse error at line {line}, column `{column}`: cannot parse {value:?} as a number")]
    Parse {
        line: u64,
        column: String,
        value: String,
    },

    #[error("unknown individual(s) at prediction time: {}", .0.join(", "))]
    UnknownIndividuals(Vec<String>),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl AdsError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AdsError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        AdsError::Csv {
            path: path.into(),
            source,
        }
    }
}
