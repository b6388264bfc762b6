//! Error type shared across the toolkit.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter left its mathematical domain (poles, ranges such as 0 < d < 1/2).
    #[error("domain error: {0}")]
    Domain(String),

    /// Two grids that must be compatible are not.
    #[error("grid size mismatch: {left} vs {right}")]
    GridMismatch { left: usize, right: usize },

    /// A nonlinear filter whose mean under the standard normal is not zero.
    #[error("filter is not centered: E[G(X)] = {offset:.3e} exceeds tolerance {tol:.1e}")]
    NotCentered { offset: f64, tol: f64 },

    /// Circulant embedding failed to produce a nonnegative spectrum.
    #[error("synthesis error: {0}")]
    Synthesis(String),

    /// Filter bank construction failed (normalization, degenerate taps, ...).
    #[error("filter construction error: {0}")]
    FilterConstruction(String),

    /// Degenerate input where a nontrivial one is required.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// An operation precondition documented on the call was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An integral that must be finite diverges for these parameters.
    #[error("divergent: {0}")]
    Divergent(String),

    /// Not enough data to carry out an estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Configuration file problems, one message per violated invariant.
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
