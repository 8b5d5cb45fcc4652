use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid entity: {0}")]
    InvalidEntity(String),

    #[error("invalid material parameters: {0}")]
    InvalidMaterial(String),

    #[error("tensor is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("mismatched discretisation: {0}")]
    Mismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular system: zero pivot at row {row}")]
    Singular { row: usize },

    #[error("solver breakdown: {0}")]
    Breakdown(String),

    #[error("solver did not converge: residual {residual:e} > tolerance {tol:e} after {iterations} iterations")]
    NotConverged {
        residual: f64,
        tol: f64,
        iterations: usize,
    },

    #[error("problem has {dofs} unknowns, above the budget of {budget}")]
    TooLarge { dofs: usize, budget: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures that come from the numerics rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. } | Error::Breakdown(_) | Error::NotConverged { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
