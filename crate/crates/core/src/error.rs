use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Phase one of the simplex method ended with positive infeasibility.
    /// `unmet_arms` lists the (zero-based) arms whose fairness rows still
    /// carried artificial mass.
    #[error("fairness vector is infeasible (phase-one residual {residual:.3e}, unmet arms {unmet_arms:?})")]
    Infeasible { residual: f64, unmet_arms: Vec<usize> },

    #[error("{0}")]
    Guard(String),

    #[error("round {index} out of range for trace of length {len}")]
    OutOfRange { index: usize, len: usize },

    #[error("availability set {0} has no entry in the randomized policy")]
    UnknownAvailabilitySet(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
