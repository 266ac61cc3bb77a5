use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid quadrature spec: {0}")]
    InvalidQuadrature(String),

    #[error("degenerate model: coupling on axis {axis} is zero")]
    DegenerateModel { axis: usize },

    #[error("kernel H^(-1) is not integrable for omega = 0")]
    InvalidKernel,

    #[error(
        "no convergence: delta {delta:e} above tolerance {tolerance:e} at resolution {resolution}"
    )]
    NoConvergence {
        resolution: usize,
        delta: f64,
        tolerance: f64,
    },

    #[error("box of radius {radius} needs {points} grid points in dimension {d}, above the limit")]
    BoxTooLarge {
        radius: usize,
        d: usize,
        points: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("truncation failure: shell magnitude {tail:e} at radius {radius}")]
    TruncationFailure { radius: usize, tail: f64 },

    #[error("size mismatch: expected {expected} values, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("non-positive value {value} at t = {t}")]
    NonPositiveValue { t: f64, value: f64 },

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
