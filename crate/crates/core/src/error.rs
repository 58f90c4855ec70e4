use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },

    #[error("missing {kind} `{id}`")]
    MissingId { kind: &'static str, id: String },

    #[error("vector `{id}` has length {found}, expected {expected}")]
    DimMismatch { id: String, expected: usize, found: usize },

    #[error("vector `{id}` contains a non-finite value")]
    NonFinite { id: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("cosine similarity undefined for a zero vector")]
    UndefinedSimilarity,

    #[error("unknown word `{0}`")]
    UnknownWord(String),

    #[error("`{word}` occurs {count} times in `{text}`, expected exactly once")]
    Occurrence { word: String, text: String, count: usize },

    #[error("negative pool exhausted: needed {needed}, only {available} eligible")]
    PoolExhausted { needed: usize, available: usize },

    #[error("training diverged at epoch {epoch}: mean loss is not finite")]
    Divergence { epoch: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid data: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
