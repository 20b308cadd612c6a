use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid instance `{id}`: {reason}")]
    InvalidInstance { id: String, reason: String },

    #[error("oracle `{oracle}` does not support {family} instances")]
    OracleUnsupported { oracle: String, family: String },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("simplex iteration limit {0} exceeded")]
    IterationLimit(u64),

    #[error("node limit {limit} reached with no incumbent")]
    NodeLimit { limit: u64 },

    #[error("warmstart basis does not match problem shape: {0}")]
    BadBasis(String),

    #[error("malformed linear program: {0}")]
    InvalidLp(String),

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("checkpoint is corrupt: {0}")]
    Checkpoint(String),

    #[error("failed to read {path}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to write {path}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parse(path: impl Into<String>, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }

    pub fn invalid_instance(id: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidInstance {
            id: id.into(),
            reason: reason.into(),
        }
    }
}
