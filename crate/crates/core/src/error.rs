use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("line {line}: malformed JSON: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("line {line}: schema error: missing or invalid field `{field}`")]
    Schema { line: usize, field: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("unresolved observation: no privileged progress for `{0}`")]
    UnresolvedObservation(String),

    #[error("malformed query: {0}")]
    MalformedQuery(String),

    #[error("timed out after {0} ms")]
    Timeout(u64),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("connection error: {0}")]
    Connection(#[from] std::io::Error),

    #[error("numeric error at iteration {iteration}: {what}")]
    Numeric { what: String, iteration: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("label {0} is not on the 11-level progress grid")]
    Label(f64),

    #[error("demonstration collection failed: {0}")]
    Collection(String),

    #[error("failed to start server on {addr}: {source}")]
    Startup {
        addr: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn numeric(what: impl Into<String>) -> Self {
        Error::Numeric {
            what: what.into(),
            iteration: 0,
        }
    }
}
