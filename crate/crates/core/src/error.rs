use thiserror::Error;

/// Errors raised by the library.
///
/// Precondition violations map to [`Error::Domain`] or [`Error::Invalid`]; the
/// remaining variants signal numerical trouble that a caller may want to
/// handle differently (retry with another configuration, switch to the
/// regularized path, and so on).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("size limit exceeded: N = {n} > {max}")]
    SizeLimit { n: usize, max: usize },

    #[error("quadrature did not converge: error estimate {estimate:.3e} above tolerance {tol:.3e}")]
    Quadrature { estimate: f64, tol: f64 },

    #[error("result not real: imaginary part {leak:.3e} exceeds tolerance {tol:.3e}")]
    Reality { leak: f64, tol: f64 },

    #[error("prefactor is singular at kappa = {0}")]
    PrefactorPole(f64),

    #[error("matrix is singular or ill-conditioned (|det| = {det:.3e}, rcond = {rcond:.3e})")]
    Singular { det: f64, rcond: f64 },

    #[error("fit rejected: {0}")]
    Fit(String),

    #[error("non-integer rank formula value {value} (residual {residual:.3e})")]
    NonInteger { value: f64, residual: f64 },

    #[error("indeterminate classification: {0}")]
    Indeterminate(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
