use thiserror::Error;

/// Errors raised by the numeric kernels and estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid dimension {0}")]
    InvalidDimension(usize),

    #[error("integrand failed at point {point:?}: {reason}")]
    IntegrandFailure { point: Vec<f64>, reason: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("covariance is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    CovarianceNotPd { min_eigenvalue: f64 },

    #[error("innovation covariance is singular")]
    InnovationCovSingular,

    #[error("predicted covariance is singular at step {step}")]
    PredictedCovSingular { step: usize },

    #[error("cross-covariance missing for step {step}")]
    MissingCrossCov { step: usize },

    #[error("factor downdate would make the covariance indefinite")]
    DowndateFailure,

    #[error("forward-pass deviation data missing for step {step}")]
    MissingForwardData { step: usize },

    #[error("jacobian of the {0} map is unavailable")]
    JacobianUnavailable(&'static str),

    #[error("invalid unscented scaling: n + lambda = {n_plus_lambda}")]
    InvalidScaling { n_plus_lambda: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("output failed: {0}")]
    Output(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
