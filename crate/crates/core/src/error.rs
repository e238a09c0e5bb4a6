use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// QBER above the last error-correction band; key generation for the
    /// block must stop.
    #[error("block aborted: qber {qber:.4} exceeds error-correction limit")]
    BlockAbort { qber: f64 },

    /// Not enough reconciled key to run privacy amplification yet.
    #[error("deferred: block of {have} bits is below the minimum of {need}")]
    Deferred { have: usize, need: usize },

    #[error("replayed push: seq {seq} already seen on link {link}")]
    Replay { link: String, seq: u64 },

    #[error("key exhausted: requested {requested} bytes from peer {peer}, {available} available")]
    KeyExhausted {
        peer: String,
        requested: usize,
        available: usize,
    },

    #[error("purpose {0:?} already used on this pool")]
    PurposeReused(String),

    #[error("relay aborted at hop {hop}: {reason}")]
    RelayAborted { hop: usize, reason: String },

    #[error("no route from {src} to {dst}")]
    NoRoute { src: String, dst: String },

    #[error("unknown link {0}")]
    UnknownLink(String),

    #[error("unknown node {0}")]
    UnknownNode(String),

    #[error("key file block {0} already used")]
    BlockUsed(usize),

    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
