use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },

    #[error("weighting matrix is indefinite (eigenvalues span [{min_eig:e}, {max_eig:e}])")]
    IndefiniteWeight { min_eig: f64, max_eig: f64 },

    #[error("ordering violated: {0}")]
    Ordering(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("quadrature requested for dimension {0} (supported up to 3)")]
    QuadratureDimension(usize),

    #[error("bisection failed to bracket: {0}")]
    Bracket(String),

    #[error("hypothesis check failed: {0}")]
    Hypothesis(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Json(_)
            | Error::Io(_)
            | Error::InvalidInput(_)
            | Error::DimensionMismatch { .. }
            | Error::Ordering(_) => 1,
            _ => 2,
        }
    }
}
