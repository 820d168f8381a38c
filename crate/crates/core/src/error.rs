use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input text. `line` is 1-based.
    #[error("line {line}: {message}: {text:?}")]
    Parse {
        line: usize,
        text: String,
        message: String,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error(
        "group {group} holds {count} hosts but a /{level} block only has {capacity} addresses"
    )]
    Capacity {
        group: u32,
        count: u64,
        capacity: u64,
        level: u8,
    },

    #[error("strategy `{strategy}` is not supported: {reason}")]
    Unsupported { strategy: String, reason: String },

    /// A library invariant failed. This is a bug, not a user error.
    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
