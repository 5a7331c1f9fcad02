use thiserror::Error;

/// Errors raised by grid construction, operator assembly and time stepping.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkgsError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("singular linear system at dt = {dt} (condition estimate {condition:e})")]
    SingularSystem { dt: f64, condition: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("usage: {0}")]
    Usage(String),

    #[error("sample {sample} failed at step {step}: {source}")]
    Sample {
        sample: usize,
        step: usize,
        #[source]
        source: Box<SkgsError>,
    },
}

impl SkgsError {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        SkgsError::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics (singular solves, non-convergence),
    /// as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            SkgsError::SingularSystem { .. } | SkgsError::NonConvergence { .. } => true,
            SkgsError::Sample { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, SkgsError>;
