//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by mesh construction, evaluation and solves.
#[derive(Debug, Error)]
pub enum MfError {
    /// A precondition on the inputs was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The operation is well defined but refused under the current state
    /// (e.g. supercritical solve without a guess, unconverged solution).
    #[error("refused: {0}")]
    Refused(String),

    /// Newton or eigenvalue iteration failed to converge.
    #[error("no convergence after {iters} iterations (residual {residual:.3e}): {context}")]
    NoConvergence {
        iters: usize,
        residual: f64,
        context: String,
    },

    /// A linear system could not be factorized or solved.
    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    /// File or serialization problem.
    #[error("io error: {0}")]
    Io(String),
}

impl MfError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        MfError::InvalidInput(msg.into())
    }

    pub fn refused(msg: impl Into<String>) -> Self {
        MfError::Refused(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, MfError>;
