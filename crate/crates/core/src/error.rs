use thiserror::Error;

/// Errors raised by the numerical kernels.
///
/// The variants map onto the CLI exit codes: `Domain` and `Parse` are input
/// problems, `Resource` and `Solver` are budget or convergence failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("resource budget exceeded: {0}")]
    Resource(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
