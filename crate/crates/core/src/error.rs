use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while reading a checkpoint file.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum CheckpointError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("manifest length mismatch: header declares {declared} bytes, {available} available")]
    ManifestLength { declared: usize, available: usize },
    #[error("payload length mismatch: manifest declares {expected} bytes, found {found}")]
    PayloadLength { expected: usize, found: usize },
    #[error("shape mismatch for tensor `{name}`: expected {expected:?}, manifest has {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("tensor `{0}` missing from manifest")]
    MissingTensor(String),
    #[error("tensor `{name}` has offset {offset}, expected {expected}")]
    BadOffset {
        name: String,
        offset: usize,
        expected: usize,
    },
    #[error("malformed manifest: {0}")]
    Manifest(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("non-finite value in {term}")]
    Numeric { term: String },
    #[error("non-finite gradient at step {step} in block `{block}`")]
    NonFiniteGradient { step: usize, block: &'static str },
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),
    #[error("checkpoint {path}: {source}")]
    Checkpoint {
        path: PathBuf,
        #[source]
        source: CheckpointError,
    },
    #[error("{path}: {source}")]
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
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
