//! Crate-wide error type.

use num_complex::Complex64;
use std::path::PathBuf;
use thiserror::Error;

/// Errors produced by the simulator core.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration field failed validation. `field` is the path of the
    /// offending field, e.g. `router.capacity`.
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    /// A constraint matrix was too close to rank deficient to solve.
    #[error("ill-conditioned constraints: smallest singular value {sigma_min:.3e}")]
    Conditioning { sigma_min: f64 },

    /// An estimator failed at runtime. Carries the offending pencil
    /// eigenvalue when one exists.
    #[error("estimation failure: {message}")]
    Estimation {
        message: String,
        eigenvalue: Option<Complex64>,
    },

    /// Statistically degenerate input (zero variance, constant envelope, ...).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// An internal consistency check failed; indicates a bug, not bad input.
    #[error("integrity violation: {0}")]
    Integrity(String),

    /// I/O failure, with the path that was being accessed.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed JSON in a scenario or report file.
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 for configuration/validation
    /// problems, 3 for runtime estimation failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::Config { .. }
            | Error::DegenerateInput(_)
            | Error::Io { .. }
            | Error::Parse { .. } => 2,
            Error::Conditioning { .. } | Error::Estimation { .. } | Error::Integrity(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
