use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A measure or function lies outside the domain an operation supports.
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical routine failed to reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A computation would exceed a configured budget.
    #[error("resource limit: {0}")]
    Resource(String),
    /// An object was used before it was ready.
    #[error("invalid state: {0}")]
    State(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
