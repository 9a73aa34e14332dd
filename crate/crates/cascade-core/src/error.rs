use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid frequency: {0}")]
    Frequency(String),

    #[error("invalid parameter `{field}`: {reason}")]
    Parameter { field: &'static str, reason: String },

    #[error("kernel unsupported in dimension {dim}: {reason}")]
    UnsupportedDimension { dim: usize, reason: String },

    #[error("empty or degenerate batch: {0}")]
    DegenerateBatch(String),

    #[error("pathwise invariant violated: {0}")]
    InvariantViolated(String),

    #[error("iteration diverged at step {step}: max value {max:.3e}")]
    Diverged { step: usize, max: f64 },
}

impl CoreError {
    pub fn parameter(field: &'static str, reason: impl Into<String>) -> Self {
        CoreError::Parameter {
            field,
            reason: reason.into(),
        }
    }
}
