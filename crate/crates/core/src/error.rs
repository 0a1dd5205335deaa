use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid algebra signature: {0}")]
    InvalidSignature(String),

    #[error("signature mismatch: {left:?} vs {right:?}")]
    SignatureMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("block {block} is not positive (minimum eigenvalue {min_eigenvalue:e})")]
    NotPositive { block: usize, min_eigenvalue: f64 },

    #[error("invalid quadrature rule: {0}")]
    InvalidRule(String),

    #[error("controller is not in GL+ (positive with bounded inverse)")]
    NotInGlPlus,

    #[error("controlled frame operator is not selfadjoint (defect {defect:e}); no Loewner bound exists")]
    NotSelfadjoint { defect: f64 },

    #[error("frame condition violated: optimal lower bound {lower:e} is not strictly positive")]
    FrameConditionViolated { lower: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("serialization: {0}")]
    Serde(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
