use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain of a numeric kernel (NaN, infinity, empty vector).
    #[error("domain error: {0}")]
    Domain(String),
    /// Shapes, lengths or tape membership do not line up.
    #[error("structural error: {0}")]
    Structural(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("invalid graph query: {0}")]
    Query(String),
    #[error("graph error: {0}")]
    Graph(String),
    #[error("inconsistent background knowledge: {0}")]
    Knowledge(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("ingestion error at row {row}, column `{column}`: {message}")]
    Ingest {
        row: usize,
        column: String,
        message: String,
    },
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
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

    pub(crate) fn format(what: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            what,
            message: message.into(),
        }
    }

    /// True for failures caused by the numbers rather than the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_) | Error::Domain(_))
    }
}
