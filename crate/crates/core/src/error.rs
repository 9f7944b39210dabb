use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its admissible range. `key` names the
    /// offending field using its scenario-file path (e.g. `geometry.lambda_b`).
    #[error("invalid `{key}`: {reason}")]
    Validation { key: String, reason: String },

    /// A formula was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The explicit transport steps would violate the CFL bound on this grid.
    #[error("CFL violation: {0}")]
    Cfl(String),

    /// A density field lost unit mass or positivity.
    #[error("density integrity: {0}")]
    Integrity(String),

    /// The numerical solver produced a non-finite or inconsistent state.
    #[error("solver failure: {0}")]
    Solver(String),

    /// A consumer required a converged equilibrium and got something else.
    #[error("solution not converged after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
