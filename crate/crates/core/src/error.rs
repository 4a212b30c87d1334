use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {context} at component {index}")]
    NonFinite { context: &'static str, index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{0} estimator is not variance-reduced")]
    NotVarianceReduced(&'static str),

    #[error("{what} did not converge (last estimate {last_estimate})")]
    NoConvergence { what: &'static str, last_estimate: f64 },

    #[error("insufficient seeds: need at least {needed}, got {got}")]
    InsufficientSeeds { needed: usize, got: usize },

    #[error("unknown algorithm preset `{0}`")]
    UnknownPreset(String),

    #[error("stationarity residual needs the previous step's gradient estimates")]
    MissingTrace,

    #[error("iteration {k}: {source}")]
    Iteration { k: usize, source: Box<Error> },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), msg: msg.into() }
    }

    pub(crate) fn at_iteration(self, k: usize) -> Self {
        match self {
            e @ Error::Iteration { .. } => e,
            e => Error::Iteration { k, source: Box::new(e) },
        }
    }
}

/// Checks that every entry is finite.
pub(crate) fn ensure_finite<'a>(
    values: impl IntoIterator<Item = &'a f64>,
    context: &'static str,
) -> Result<()> {
    match values.into_iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { context, index }),
        None => Ok(()),
    }
}

pub(crate) fn ensure_same_len(expected: usize, found: usize, context: &'static str) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { context, expected, found })
    }
}
