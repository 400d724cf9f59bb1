//! Client/auditor library behind the `dscs` binary: key-file
//! persistence, remote protocol operations, and the benchmark harness.

pub mod bench;
pub mod keyfile;
pub mod ops;

use std::fmt;

/// Which protocol a key file (and the file it governs) speaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Dscs1,
    Dscs2,
}

impl Protocol {
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "dscs1" => Some(Protocol::Dscs1),
            "dscs2" => Some(Protocol::Dscs2),
            _ => None,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Dscs1 => "dscs1",
            Protocol::Dscs2 => "dscs2",
        })
    }
}

/// CLI failure classes; the binary maps these onto exit codes
/// (0 success, 1 verification failure, 2 transport/usage).
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// A proof or response failed cryptographic verification.
    #[error("verification failed: {0}")]
    Verify(String),
    /// Bad invocation: flags, file contents, protocol mismatch.
    #[error("usage: {0}")]
    Usage(String),
    /// Transport or server-side failure.
    #[error("transport: {0}")]
    Transport(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verify(_) => 1,
            CliError::Usage(_) | CliError::Transport(_) => 2,
        }
    }
}

impl From<dscs_server::ServerError> for CliError {
    fn from(e: dscs_server::ServerError) -> Self {
        CliError::Transport(e.to_string())
    }
}

impl From<dscs_core::Error> for CliError {
    fn from(e: dscs_core::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Transport(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
