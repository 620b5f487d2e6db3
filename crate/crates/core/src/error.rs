use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates a documented precondition or invariant.
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("grid entry {index} is invalid: {reason}")]
    InvalidGridEntry { index: usize, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("infeasible: {family} ({detail})")]
    Infeasible { family: String, detail: String },

    #[error("solver failure: {0}")]
    Solver(String),

}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Invalid(_)
                | Error::InvalidGridEntry { .. }
                | Error::Dimension { .. }
        )
    }
}
