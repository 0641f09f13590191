use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Everything except [`Error::Io`] is a contract violation: the caller
/// supplied inputs outside an operation's domain, or a computation left
/// the finite reals.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("pseudo-gradient is not strongly monotone: minimum eigenvalue of symmetric part is {eigmin}")]
    NotMonotone { eigmin: f64 },

    #[error("non-finite value {value} at {context}")]
    NonFinite { value: f64, context: String },

    #[error("non-finite value at t={t}, player {player}, stage {stage}")]
    NonFiniteStep {
        t: u64,
        player: usize,
        stage: &'static str,
    },

    #[error("run {run_index} failed: {source}")]
    Run {
        run_index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for I/O failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Run { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
