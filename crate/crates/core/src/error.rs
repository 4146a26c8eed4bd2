use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiskError {
    /// Shapes, lengths or index sets do not line up.
    #[error("structural error: {0}")]
    Structural(String),
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The objects are individually valid but cannot be combined this way.
    #[error("configuration error: {0}")]
    Configuration(String),
    /// A documented precondition of the operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// Two independent computations that must agree did not. Always a bug.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
}

pub type Result<T> = std::result::Result<T, RiskError>;

pub(crate) fn structural(msg: impl Into<String>) -> RiskError {
    RiskError::Structural(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> RiskError {
    RiskError::Domain(msg.into())
}

pub(crate) fn configuration(msg: impl Into<String>) -> RiskError {
    RiskError::Configuration(msg.into())
}
