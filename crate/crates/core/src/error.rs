use std::path::PathBuf;

/// Errors raised anywhere in the audit pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncation { expected: u64, found: u64 },
    #[error("data error: {0}")]
    Data(String),
    #[error("empty matrix")]
    EmptyMatrix,
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dim { expected: usize, got: usize },
    #[error("rank error: requested {requested} components but only {available} non-zero eigenvalues")]
    Rank { requested: usize, available: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("reconstruction batch for `{got}` supplied for record `{expected}`")]
    IdMismatch { expected: String, got: String },
    #[error("reconstruction oracle failed for record `{record_id}`: {message}")]
    Oracle { record_id: String, message: String },
    #[error("imbalanced audit: {0}")]
    Imbalance(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
