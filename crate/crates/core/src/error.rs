use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HmvpError {
    #[error("dimension mismatch: expected n = {expected}, got n = {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value while differentiating `{field}` at {at}")]
    Differentiation { field: String, at: String },

    #[error("degenerate horizontal gradient: |grad_H u| = {norm:e} below threshold {threshold:e}")]
    DegenerateGradient { norm: f64, threshold: f64 },

    #[error("degenerate estimate: {0}")]
    DegenerateEstimate(String),

    #[error("field `{field}` is undefined at {at}")]
    Domain { field: String, at: String },

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("cannot parse `{input}`: {reason}")]
    Parse { input: String, reason: String },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, HmvpError>;
