use thiserror::Error;

/// Errors raised by the planning and simulation models.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the formula.
    #[error("domain error: {0}")]
    Domain(String),
    /// A hardware or policy constraint is not satisfied.
    #[error("constraint violated: {0}")]
    Constraint(String),
    /// The network configuration is inconsistent with the request.
    #[error("configuration error: {0}")]
    Config(String),
    /// Input data does not satisfy its preconditions.
    #[error("data error: {0}")]
    Data(String),
    /// The instance is too large for exhaustive treatment.
    #[error("instance too large: {0}")]
    Size(String),
    /// A quantity is undefined for the given input.
    #[error("undefined: {0}")]
    Undefined(String),
}

pub type Result<T> = std::result::Result<T, Error>;
