use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid apex: the quadrangle is undefined at the origin")]
    InvalidApex,

    #[error("invalid depth {depth}: must lie in [0, {max}]")]
    InvalidDepth { depth: f64, max: f64 },

    #[error("invalid radius {0}: must be positive and finite")]
    InvalidRadius(f64),

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("geometry fault: {0}")]
    GeometryFault(String),

    #[error("non-termination fault after {steps} steps")]
    NonterminationFault { steps: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("all samples censored in the fit window")]
    AllCensored,

    #[error("internal fault: {0}")]
    Fault(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
