use thiserror::Error;

/// Errors produced by graph construction, heat filtering and transport.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {index} has zero k-NN bandwidth (duplicate points)")]
    DuplicatePoints { index: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("negative edge weight {value} at ({row}, {col})")]
    NegativeWeight { row: usize, col: usize, value: f64 },

    #[error("diffusion time must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error("signal length {found} does not match graph size {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("conjugate gradient did not converge within {iterations} iterations")]
    SolveFailure { iterations: usize },

    #[error("problem size {n} exceeds the dense limit of {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("heat filter produced negative output {value} (t or K too small for this graph)")]
    KernelNotPositive { value: f64 },

    #[error("marginal error stagnated at {marginal_error} (distributions in different components)")]
    Disconnected { marginal_error: f64 },

    #[error("kernel row {row} underflowed to zero (regularization too small)")]
    NumericalUnderflow { row: usize },

    #[error("index {index} out of range for size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("transport plan carries mass {mass}, expected 1")]
    DegeneratePlan { mass: f64 },

    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Numerical failures, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::KernelNotPositive { .. }
                | Error::SolveFailure { .. }
                | Error::NumericalUnderflow { .. }
                | Error::Disconnected { .. }
        )
    }
}
