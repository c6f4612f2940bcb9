//! Error type shared by every module.

use thiserror::Error;

/// Failure modes of the numerical operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("compactification constraint violated: {0}")]
    Compactification(String),
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("path crosses the separating family: {0}")]
    Path(String),
    #[error("unsupported surface: {0}")]
    UnsupportedSurface(String),
    #[error("kernel is singular at coincident points")]
    Singularity,
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("covariance factorization failed: {0}")]
    Factorization(String),
    #[error("regularization not resolved: {0}")]
    Resolution(String),
    #[error("non-integrable singularity: {0}")]
    Divergence(String),
    #[error("not in the neutrality set: {0}")]
    Neutrality(String),
    #[error("invalid separating family: {0}")]
    Family(String),
}

impl Error {
    /// True for numerical failures (as opposed to invalid input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature(_) | Error::NonConvergence(_) | Error::Factorization(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
