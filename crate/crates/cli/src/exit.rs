//! Exit codes.
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | other failure (I/O, server error, unexpected response) |
//! | 2 | usage error or invalid configuration |
//! | 3 | job not ready (results requested before completion) |
//! | 4 | job or device not found |
//! | 5 | workload rejected (validation or device capability) |
//! | 6 | service unreachable |
//! | 7 | timed out waiting for a job |
//! | 8 | job ended FAILED or CANCELLED |

use conqure_queue::ClientError;
use thiserror::Error;

pub const OK: u8 = 0;
pub const FAILURE: u8 = 1;
pub const USAGE: u8 = 2;
pub const NOT_READY: u8 = 3;
pub const NOT_FOUND: u8 = 4;
pub const REJECTED: u8 = 5;
pub const TRANSPORT: u8 = 6;
pub const TIMEOUT: u8 = 7;
pub const JOB_FAILED: u8 = 8;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    NotReady(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Rejected(String),
    #[error("{0}")]
    Transport(String),
    #[error("{0}")]
    Timeout(String),
    #[error("{0}")]
    JobFailed(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => USAGE,
            CliError::NotReady(_) => NOT_READY,
            CliError::NotFound(_) => NOT_FOUND,
            CliError::Rejected(_) => REJECTED,
            CliError::Transport(_) => TRANSPORT,
            CliError::Timeout(_) => TIMEOUT,
            CliError::JobFailed(_) => JOB_FAILED,
            CliError::Other(_) => FAILURE,
        }
    }

    /// Stable name of the error class for JSON output.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::NotReady(_) => "not_ready",
            CliError::NotFound(_) => "not_found",
            CliError::Rejected(_) => "rejected",
            CliError::Transport(_) => "transport",
            CliError::Timeout(_) => "timeout",
            CliError::JobFailed(_) => "job_failed",
            CliError::Other(_) => "error",
        }
    }

    pub fn other(e: impl std::fmt::Display) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> Self {
        let msg = e.to_string();
        match e {
            ClientError::Transport(_) => CliError::Transport(msg),
            ClientError::NotFound(_) => CliError::NotFound(msg),
            ClientError::NotReady { .. } => CliError::NotReady(msg),
            ClientError::Validation(_) | ClientError::Capability(_) => CliError::Rejected(msg),
            ClientError::JobFailed { .. } => CliError::JobFailed(msg),
            ClientError::Timeout(_) => CliError::Timeout(msg),
            ClientError::Server { .. } | ClientError::Protocol(_) => CliError::Other(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}
