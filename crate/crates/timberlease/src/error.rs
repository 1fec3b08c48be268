//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or state violates a model invariant.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Malformed configuration (bad keys, inconsistent values).
    #[error("config error: {0}")]
    Config(String),

    /// Malformed or inconsistent input data (CSV schema, gaps, ordering).
    #[error("data error: {0}")]
    Data(String),

    /// A numerical procedure failed (non-convergence, singular system).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Command-line usage error outside of clap's own parsing.
    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status for the CLI: 1 usage, 2 data/schema, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::InvalidParam(_) | Error::Config(_) | Error::Data(_) | Error::Io(_) => 2,
            Error::Numerical(_) => 3,
        }
    }
}
