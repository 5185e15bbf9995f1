use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigError;
use crate::fe::NonConvergence;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A domain invariant does not hold; `invariant` names it.
    #[error("invalid input: {invariant}")]
    Validation { invariant: String },

    #[error("{quantity} = {value} is outside the calibrated span [{min}, {max}]")]
    OutOfRange {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("singular expression: {0}")]
    Singular(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    NonConvergence(Box<NonConvergence>),

    #[error("grid of {requested} points exceeds the cap of {cap}; raise the cap to at least {requested}")]
    GridTooLarge { requested: u64, cap: u64 },

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(invariant: impl Into<String>) -> Self {
        Error::Validation {
            invariant: invariant.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular(_) | Error::Numerical(_) | Error::NonConvergence(_)
        )
    }
}

pub(crate) fn ensure(cond: bool, invariant: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::validation(invariant))
    }
}
