use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("target ({x:.4}, {y:.4}) is outside the reachable workspace")]
    Unreachable { x: f64, y: f64 },

    #[error("inverse kinematics did not converge after {iterations} iterations (residual {residual:.3e} m)")]
    IkNoConvergence { iterations: usize, residual: f64 },

    #[error("simulation diverged at step {step}")]
    Diverged { step: usize },

    #[error("{phase} trial {trial_index} failed: {source}")]
    Trial {
        phase: &'static str,
        trial_index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("failed to parse {path}: {message}")]
    ConfigParse { path: PathBuf, message: String },

    #[error("schema error in {path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from bad user input (config, schema) rather
    /// than from a failure while running.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Config(_) | Error::ConfigParse { .. } | Error::Schema { .. } => true,
            // A named input file that does not exist is a usage error.
            Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            _ => false,
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}
