use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// An allocation or instance is structurally malformed.
    #[error("structural error: {0}")]
    Structural(String),
    /// The exact oracle refuses instances beyond its configured size.
    #[error("capacity error: {0}")]
    Capacity(String),
    /// An internal guarantee was violated. Always indicates a bug.
    #[error("internal inconsistency: {0}")]
    Inconsistency(String),
    /// Input text could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
