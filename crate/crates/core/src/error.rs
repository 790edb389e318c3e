use thiserror::Error;

/// Errors raised by geometry construction, the linear theory and the
/// fixed-point and balancing drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GluingError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("grid too coarse: {0}")]
    Resolution(String),

    #[error("conformal factor must stay positive (min 1 + v = {min:e})")]
    Domain { min: f64 },

    #[error("degenerate state: {0}")]
    Degenerate(String),

    #[error("source support violation: {0}")]
    Support(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("Neumann series does not contract: first-pass ratio {ratio:.3e} >= 1")]
    NoContraction { ratio: f64 },

    #[error("iteration did not converge after {iterations} steps (last step norm {last:.3e})")]
    NotConverged { iterations: usize, last: f64 },

    #[error("sign search failed: {0}")]
    SignSearch(String),

    #[error("assumption violated: {0}")]
    Assumption(String),
}

impl GluingError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        GluingError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, GluingError>;
