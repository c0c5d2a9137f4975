use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("outside the operator domain: {0}")]
    Domain(String),

    /// `1 - G_lambda` is (numerically) not invertible.
    #[error("singular system (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("invalid state: {0}")]
    State(String),

    #[error("unusable data: {0}")]
    Data(String),

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),
}

impl Error {
    /// Numerical failures (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. } | Error::Convergence { .. } | Error::InternalConsistency(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
