use thiserror::Error;

/// Errors returned by the simulator and the bound calculators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The caller supplied data outside an operation's domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A bound was requested where its hypothesis does not hold.
    #[error("hypothesis not satisfied: {0}")]
    HypothesisViolated(String),
    /// An internal consistency check failed; indicates a construction bug.
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
