use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: need at least {needed} distinct sizes, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("invalid allocation problem: {0}")]
    InvalidProblem(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Oracle(#[from] OracleError),

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

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv { path: path.into(), source }
    }
}

/// Failures raised by a loss oracle, synthetic or external.
#[derive(Debug, Error)]
pub enum OracleError {
    #[error("pool exhausted for slice {slice}: requested size {requested}, limit {limit}")]
    PoolExhausted { slice: String, requested: u64, limit: u64 },

    #[error("trainer did not answer within {0} s")]
    TrainerTimeout(u64),

    #[error("trainer exited unexpectedly ({status})")]
    TrainerCrashed { status: String },

    #[error("protocol error: {message}; raw payload: {raw}")]
    Protocol { message: String, raw: String },

    #[error("trainer reported error {code}: {message}")]
    Remote { code: String, message: String },

    #[error("query shape mismatch: {0}")]
    Shape(String),

    #[error("failed to launch trainer: {0}")]
    Launch(#[source] std::io::Error),
}
