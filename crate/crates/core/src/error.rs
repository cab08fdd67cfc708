use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed CSV at row {row}: {msg}")]
    Csv { path: PathBuf, row: u64, msg: String },
    #[error("duplicate body id {0}")]
    DuplicateBodyId(u32),
    #[error("instance {pair_id} references unknown body id {body_id}")]
    UnknownBody { pair_id: usize, body_id: u32 },
    #[error("row {row}: unknown stance label {value:?}")]
    UnknownStance { row: u64, value: String },
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("unsupported format version {found:?} (expected {expected:?})")]
    Version { expected: String, found: String },
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("resource fingerprint mismatch: model built for {expected}, features built with {found}")]
    FingerprintMismatch { expected: String, found: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
