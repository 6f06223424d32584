use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: malformed trace record: {reason}")]
    MalformedTrace {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("undefined for an empty run (zero requests)")]
    NoRequests,

    #[error("trace is empty")]
    EmptyTrace,

    #[error("sweep cell {index} ({label}) failed: {source}")]
    Cell {
        index: usize,
        label: String,
        #[source]
        source: Box<Error>,
    },
}
