use thiserror::Error;

/// Errors raised by the solvers, samplers and config loaders.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of a function (e.g. `f(x)` for `x < 0`).
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration file could not be parsed.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed or out-of-range input data.
    #[error("validation error: {0}")]
    Validation(String),

    /// A bracketed root search found no sign change.
    #[error("root solver failed: {0}")]
    SolverFailure(String),

    /// An operation was called outside the regime it is defined for.
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
