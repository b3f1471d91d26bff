use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad classes of failure, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: malformed documents, invalid models or tolerances.
    Config,
    /// A numerical precondition failed (loss of definiteness, solver failure).
    Numerical,
    /// Shapes or sequence lengths do not line up.
    Dimension,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{what} is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { what: String, asymmetry: f64 },

    #[error("{what} is not positive definite")]
    NotPositiveDefinite { what: String },

    #[error("multiplier {lambda:e} does not exceed the spectral radius {radius:e}")]
    MultiplierTooSmall { lambda: f64, radius: f64 },

    #[error("tolerance {0} is outside the supported range [0, 1000] nats")]
    ToleranceOutOfRange(f64),

    #[error("multiplier solver failed for tolerance {tolerance:e}: residual {residual:e}")]
    SolverFailure { tolerance: f64, residual: f64 },

    #[error(
        "least-favorable model infeasible at step {step}: smallest eigenvalue {min_eigenvalue:e} \
         (tolerance too large for a well-posed adversary)"
    )]
    Infeasible { step: usize, min_eigenvalue: f64 },

    #[error("invalid model:\n{0}")]
    InvalidModel(ValidationReport),

    #[error("{0}")]
    Config(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Dimension(_) => ErrorKind::Dimension,
            Error::NotPositiveDefinite { .. }
            | Error::MultiplierTooSmall { .. }
            | Error::SolverFailure { .. }
            | Error::Infeasible { .. } => ErrorKind::Numerical,
            Error::NotSymmetric { .. }
            | Error::ToleranceOutOfRange(_)
            | Error::InvalidModel(_)
            | Error::Config(_) => ErrorKind::Config,
        }
    }

    pub(crate) fn not_pd(what: impl Into<String>) -> Self {
        Error::NotPositiveDefinite { what: what.into() }
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
