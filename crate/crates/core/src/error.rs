use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid sequence{}: illegal residue '{residue}' at position {index}", record.as_ref().map(|r| format!(" in record '{r}'")).unwrap_or_default())]
    IllegalResidue {
        record: Option<String>,
        residue: char,
        index: usize,
    },

    #[error("empty sequence{}", .0.as_ref().map(|r| format!(" in record '{r}'")).unwrap_or_default())]
    EmptySequence(Option<String>),

    #[error("duplicate record id '{0}'")]
    DuplicateId(String),

    #[error("label must be 0 or 1, got '{value}' (line {line})")]
    LabelDomain { line: usize, value: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("record '{id}': {source}")]
    Record {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("training diverged at step {step}: non-finite loss (recent losses: {trace:?})")]
    NonFinite { step: usize, trace: Vec<f64> },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_record(self, id: &str) -> Self {
        Error::Record {
            id: id.to_string(),
            source: Box::new(self),
        }
    }

    pub(crate) fn in_fold(self, fold: usize) -> Self {
        Error::Fold {
            fold,
            source: Box::new(self),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
