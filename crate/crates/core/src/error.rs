use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty sequence")]
    EmptySequence,

    #[error("invalid article {id}: {reason}")]
    InvalidArticle { id: String, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("donor exhausted: {0}")]
    DonorExhausted(String),

    #[error("insufficient eligible congruent articles: need {needed}, found {available}")]
    Shortfall { needed: usize, available: usize },

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("divergence: {0}; try lowering the learning rate")]
    Divergence(String),

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }
}
