use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("gaussian approximation requested for rate {rate} below the validity threshold {threshold}")]
    ApproximationDomain { rate: f64, threshold: f64 },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("match failed: {0}")]
    Match(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("no sign change of the profile score on [{lo}, {hi}] (score {score_lo:e} .. {score_hi:e})")]
    NoRoot {
        lo: f64,
        hi: f64,
        score_lo: f64,
        score_hi: f64,
    },

    #[error("stationary point is not a maximum: negative hessian has eigenvalues {0:e}, {1:e}")]
    Saddle(f64, f64),

    #[error("insufficient samples: {have} < {need}")]
    InsufficientSamples { have: usize, need: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("serialization error: {0}")]
    Serialization(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures raised by the maximum-likelihood fit.
    pub fn is_estimator_failure(&self) -> bool {
        matches!(
            self,
            Error::DegenerateData(_) | Error::NoRoot { .. } | Error::Saddle(..)
        )
    }
}
