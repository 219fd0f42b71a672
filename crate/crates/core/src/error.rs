//! Crate-wide error type.

/// Errors reported by schedules, framing, tree construction and execution.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid or inconsistent mode parameters.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An operation was asked of a mode that does not support it, e.g.
    /// streaming a stored-content schedule of unknown length.
    #[error("mode mismatch: {0}")]
    Mode(String),

    /// Node serialization rejected its inputs.
    #[error("framing error: {0}")]
    Frame(String),

    /// Node deserialization failed; `position` is the bit index at which
    /// parsing stopped.
    #[error("decode error at bit {position}: {reason}")]
    Decode { position: u64, reason: String },

    /// Reading the message failed.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn mode(msg: impl Into<String>) -> Self {
        Error::Mode(msg.into())
    }

    pub(crate) fn frame(msg: impl Into<String>) -> Self {
        Error::Frame(msg.into())
    }

    pub(crate) fn decode(position: u64, reason: impl Into<String>) -> Self {
        Error::Decode {
            position,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
