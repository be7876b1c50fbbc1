use std::path::PathBuf;

use thiserror::Error;

use crate::etm::TopicModel;

pub type Result<T, E = EccotError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum EccotError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("vocabulary is empty after applying min_count/max_vocab")]
    EmptyVocabulary,

    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: dimension mismatch (expected {expected}, found {found})")]
    DimensionMismatch {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("missing embedding {0:?}")]
    MissingEmbedding(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("fit diverged at epoch {epoch}: {reason}")]
    Diverged {
        epoch: usize,
        reason: String,
        last_good: Box<TopicModel>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl EccotError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EccotError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn malformed(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        EccotError::Malformed {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code: 2 config/validation, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            EccotError::Config(_) | EccotError::EmptyVocabulary => 2,
            EccotError::Numeric(_) | EccotError::Diverged { .. } => 4,
            EccotError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
            _ => 3,
        }
    }
}
