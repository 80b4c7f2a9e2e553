use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A density whose mass is not captured by the tabulation interval.
    #[error("truncation error: captured mass {mass:.9} outside [1-1e-4, 1+1e-4] on [{lo}, {hi}]")]
    Truncation { mass: f64, lo: f64, hi: f64 },

    #[error("sampler construction failed for {0}")]
    Sampler(String),

    #[error("training error: {0}")]
    Training(String),

    /// The dual solver hit its iteration cap or stalled. Carries the state reached.
    #[error(
        "solver did not converge after {iterations} iterations: \
         max violation {max_violation:.3e}, dual objective {objective:.9}"
    )]
    NonConvergence {
        iterations: usize,
        max_violation: f64,
        objective: f64,
    },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("parse error in {path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier used in the CLI's one-line error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Truncation { .. } => "truncation",
            Error::Sampler(_) => "sampler",
            Error::Training(_) => "training",
            Error::NonConvergence { .. } => "nonconvergence",
            Error::Config { .. } => "config",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
        }
    }
}
