use thiserror::Error;

pub type Result<T> = std::result::Result<T, NapesError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NapesError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("matrix is numerically singular")]
    SingularMatrix,

    #[error("matrix is not Hermitian (asymmetry {asymmetry:e} exceeds tolerance {tolerance:e})")]
    NonHermitian { asymmetry: f64, tolerance: f64 },

    #[error("constraint denominator vanished")]
    DegenerateDenominator,

    #[error("noise reference window has zero energy")]
    ZeroNoiseWindow,

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("invalid snapshot plan: {0}")]
    InvalidPlan(String),

    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("invalid segmentation: {0}")]
    InvalidSegments(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("KKT system is singular")]
    SingularSystem,
}

impl NapesError {
    pub(crate) fn shape(expected: impl ToString, found: impl ToString) -> Self {
        NapesError::ShapeMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
