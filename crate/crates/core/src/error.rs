use thiserror::Error;

/// Errors raised by the numerical library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Bad argument: dimension mismatch, non-finite input, violated precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The operation is undefined at the given point (e.g. a norm gradient at the origin).
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure failed to converge or produced a non-finite value.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Gains do not make the linear closed loop Hurwitz.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A simulated state left the divergence ball.
    #[error("divergence at t = {time}: |x| = {norm:e} exceeds {threshold:e}")]
    Divergence {
        time: f64,
        norm: f64,
        threshold: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("{name} must be finite, got {value}")))
    }
}

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Argument(format!(
            "dimension mismatch: expected {expected}, got {got}"
        )))
    }
}
