//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Dimension mismatch between tensors or between data and topology.
    #[error("shape error: {0}")]
    Shape(String),

    /// An argument violated an operation's contract.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Run configuration could not be parsed or validated.
    #[error("config error: {0}")]
    Config(String),

    /// A data file (CSV, manifest, truth sidecar) could not be read or parsed.
    #[error("data error: {0}")]
    Data(String),

    /// The training objective became non-finite.
    #[error("training diverged at epoch {epoch}: objective is not finite")]
    Divergence { epoch: usize },

    /// An iterative solver exhausted its iteration budget.
    #[error("failed to converge: {0}")]
    Convergence(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 data, 4 divergence/non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Argument(_) | Error::Shape(_) => 2,
            Error::Data(_) | Error::Io(_) => 3,
            Error::Divergence { .. } | Error::Convergence(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
