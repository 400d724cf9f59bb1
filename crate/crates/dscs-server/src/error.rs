use thiserror::Error;

/// Server-side failures; each maps to a stable wire error code so
/// clients can react programmatically.
#[derive(Debug, Error)]
pub enum ServerError {
    #[error("unknown fid")]
    UnknownFid,
    #[error("fid already in use")]
    DuplicateFid,
    #[error("block/tag/h-list counts disagree")]
    CountMismatch,
    #[error("index out of range")]
    IndexOutOfRange,
    #[error("file is busy (conflicting audit or update in flight)")]
    Busy,
    #[error("protocol error: {0}")]
    Protocol(#[from] dscs_core::Error),
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("simulated crash (test fault injection)")]
    SimulatedCrash,
}

impl ServerError {
    pub fn code(&self) -> u16 {
        match self {
            ServerError::UnknownFid => 1,
            ServerError::DuplicateFid => 2,
            ServerError::CountMismatch => 3,
            ServerError::IndexOutOfRange => 4,
            ServerError::Busy => 5,
            ServerError::Malformed(_) => 6,
            ServerError::Protocol(dscs_core::Error::IndexOutOfRange(_)) => 4,
            ServerError::Protocol(dscs_core::Error::AppendOnly) => 8,
            ServerError::Protocol(_) => 7,
            ServerError::Io(_) => 9,
            ServerError::SimulatedCrash => 10,
        }
    }
}

pub type Result<T> = std::result::Result<T, ServerError>;
