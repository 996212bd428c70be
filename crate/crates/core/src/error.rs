use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// A k-th nearest-neighbor distance was zero, so its logarithm is undefined.
    #[error("degenerate distance: k-th neighbor of point {index} is at distance 0")]
    DegenerateDistance { index: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("graph is empty")]
    EmptyGraph,

    #[error("malformed graph stream at byte {offset}: {message}")]
    GraphFormat { offset: usize, message: String },

    #[error("maze parse error at line {line}, column {column}: {message}")]
    MazeParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
