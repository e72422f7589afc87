use num_bigint::BigUint;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// An exhaustive enumeration would visit more cases than its guard allows.
    #[error("{what} at {at} needs {required} cases, guard is {limit}")]
    ResourceGuard {
        what: &'static str,
        at: String,
        required: BigUint,
        limit: u64,
    },

    #[error("malformed z-table cache: {0}")]
    Cache(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn params(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }
}
