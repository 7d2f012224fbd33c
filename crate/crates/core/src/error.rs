use thiserror::Error;

/// Errors raised by the equilibrium library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A model or grid parameter violates its domain.
    #[error("invalid parameter: {0}")]
    Domain(String),

    /// A time or index argument lies outside its admissible range.
    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The closed form is only available on equidistant grids.
    #[error("operation requires an equidistant grid")]
    NonEquidistant,

    #[error("grid size N = {requested} exceeds the configured cap {cap}")]
    Capacity { requested: usize, cap: usize },

    /// LU factorization hit a zero or non-finite pivot.
    #[error("matrix is singular to working precision (pivot {pivot} at column {column})")]
    Singular { column: usize, pivot: f64 },

    /// A normalized closed-form quantity fell below the underflow guard.
    #[error("closed form is ill-conditioned: {0}")]
    IllConditioned(String),

    /// An exponential would leave the floating-point range.
    #[error("overflow guard: {0}")]
    Overflow(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

impl Error {
    /// Whether the failure is numerical rather than a rejected input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Self::Singular { .. } | Self::IllConditioned(_) | Self::Overflow(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
