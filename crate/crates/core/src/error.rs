use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value {value} at node {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("point ({x}, {y}) lies outside the {width} x {height} m domain")]
    OutOfDomain { x: f64, y: f64, width: f64, height: f64 },

    #[error("grid mismatch: {0}")]
    Shape(String),

    #[error("degenerate prior: {0}")]
    DegeneratePrior(String),

    #[error("heat solver did not converge in {iters} iterations (relative residual {residual:e})")]
    SolverFailure { iters: usize, residual: f64 },

    #[error("invalid configuration at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// True for errors that originate in user-supplied configuration.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::Parse { .. } | Error::DegeneratePrior(_)
        )
    }
}
