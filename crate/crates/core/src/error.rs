use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("corrupt container {path} at byte offset {offset}: {reason}")]
    Corrupt {
        path: PathBuf,
        offset: u64,
        reason: String,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed input at line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("duplicate doc_id {0:?}")]
    DuplicateDocId(String),

    #[error("empty document {0:?}")]
    EmptyDocument(String),

    #[error("term {0:?} is missing from the document-frequency table")]
    UnknownTerm(String),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("workflow configuration error: {0}")]
    Config(String),

    #[error("stage {stage:?} failed: {source}")]
    StageFailed {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
