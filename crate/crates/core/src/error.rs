use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("degenerate dataset: {0}")]
    Degenerate(String),

    /// A caller broke an operation's precondition (bad index, nonpositive step, wrong case).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The requested quantity does not exist for this objective (e.g. a gradient of a hinge loss).
    #[error("{0}")]
    Unavailable(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("reference failed: {0}")]
    ReferenceFailed(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit code: 2 configuration, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Contract(_) => 2,
            Error::Parse { .. } | Error::Data(_) | Error::Degenerate(_) | Error::Io(_) => 3,
            Error::Numerical(_) | Error::ReferenceFailed(_) | Error::Unavailable(_) => 4,
        }
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn unavailable(msg: impl Into<String>) -> Self {
        Error::Unavailable(msg.into())
    }
}
