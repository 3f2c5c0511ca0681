use thiserror::Error;

/// Largest dense joint table the exact inference routines will allocate.
pub const STATE_SPACE_LIMIT: u128 = 1 << 22;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("state space of {size} cells exceeds the limit of {limit}")]
    Capacity { size: u128, limit: u128 },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
