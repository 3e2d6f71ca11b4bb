use alloc::string::String;

/// Errors shared across the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Two quantities that must agree in dimension do not.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A sampling pattern that cannot be realized on the angle grid.
    #[error("invalid sampling pattern: {0}")]
    InvalidPattern(String),

    /// Schedule construction or lookup outside its domain.
    #[error("invalid noise schedule: {0}")]
    InvalidSchedule(String),

    /// An iterate became NaN or infinite.
    #[error("numerical breakdown in {context} at step {step}")]
    NumericalBreakdown { context: &'static str, step: usize },

    /// An operator violated a contract it was assumed to satisfy.
    #[error("operator contract violation: {0}")]
    Contract(String),

    /// A matrix required to be invertible or positive definite is not.
    #[error("singular or indefinite matrix in {0}")]
    SingularMatrix(&'static str),

    /// A configuration value outside its documented range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An iteration diverged (objective grew past its abort threshold).
    #[error("divergence in {context}: {detail}")]
    Diverged {
        context: &'static str,
        detail: String,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            actual,
        }
    }
}
