use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),

    #[error("vessel sinks: equilibrium draft {draft:.4} m exceeds hull height {hull_height:.4} m")]
    Sinks { draft: f64, hull_height: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid thruster curve: {0}")]
    InvalidCurve(String),

    #[error("fit precondition violated: {0}")]
    FitPrecondition(String),

    #[error("goal grid index {index} out of range 0..{len}")]
    GridIndex { index: usize, len: usize },

    #[error("episode already terminated; reset before stepping")]
    EpisodeTerminated,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("loss became non-finite in epoch {epoch}, minibatch {minibatch}")]
    NonFiniteLoss { epoch: usize, minibatch: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
