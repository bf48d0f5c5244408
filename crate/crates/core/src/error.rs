//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },

    /// The assembled matrix factorized as singular. Surfaced, never
    /// regularized: a singular system signals a discretization where
    /// uniqueness of the Dirichlet problem fails numerically.
    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("no convergence after {iterations} iterations (last residual {last_residual:.3e})")]
    NoConvergence {
        iterations: usize,
        last_residual: f64,
    },

    /// A quantity that the theory forces positive came out non-positive.
    #[error("positivity violated: {0}")]
    PositivityViolation(String),

    #[error("solve failed at homotopy parameter lambda={lambda}: {source}")]
    ContinuationFailure {
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    /// The doubling search for the barrier exponent hit its cap. Carries the
    /// trace of `max Lv` per attempted exponent.
    #[error("barrier exponent search failed: no alpha <= {cap} gives max Lv < 0 (trace: {trace:?})")]
    BarrierSearchFailed { cap: f64, trace: Vec<(f64, f64)> },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
