use std::path::PathBuf;

use frc_ingest::IngestError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] frc_core::Error),

    #[error(transparent)]
    Ingest(#[from] IngestError),

    /// A rank-deficient fit, with the offending robots named by key.
    #[error("{source}; robot keys: {}", .robots.join(", "))]
    RankDeficient {
        robots: Vec<String>,
        source: frc_core::Error,
    },

    #[error("{0}")]
    RosterMismatch(String),

    #[error("bad report: {0}")]
    Report(String),

    #[error("{}: {reason}", .path.display())]
    Io { path: PathBuf, reason: String },

    #[error("port {port} is already in use")]
    PortInUse { port: u16 },

    #[error("server failed: {0}")]
    Server(String),
}

pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const AUTH_FAILED: i32 = 2;
    pub const ALREADY_EXISTS: i32 = 3;
    pub const RANK_DEFICIENT: i32 = 4;
    /// Command-line usage errors (sysexits `EX_USAGE`).
    pub const USAGE: i32 = 64;
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        let core = match self {
            CliError::Core(e) | CliError::Ingest(IngestError::ValidationFailed(e)) => Some(e),
            _ => None,
        };
        match (self, core) {
            (CliError::RankDeficient { .. }, _) => exit::RANK_DEFICIENT,
            (_, Some(frc_core::Error::RankDeficient { .. })) => exit::RANK_DEFICIENT,
            (CliError::Ingest(IngestError::AuthFailed(_)), _) => exit::AUTH_FAILED,
            (CliError::Ingest(IngestError::AlreadyExists(_)), _) => exit::ALREADY_EXISTS,
            _ => exit::FAILURE,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let rank = frc_core::Error::RankDeficient {
            rank: 3,
            columns: 4,
            robots: vec![0, 1],
        };
        assert_eq!(CliError::from(rank.clone()).exit_code(), exit::RANK_DEFICIENT);
        assert_eq!(
            CliError::from(IngestError::ValidationFailed(rank)).exit_code(),
            exit::RANK_DEFICIENT
        );
        assert_eq!(
            CliError::from(IngestError::AuthFailed("x".into())).exit_code(),
            exit::AUTH_FAILED
        );
        assert_eq!(
            CliError::from(IngestError::AlreadyExists("f".into())).exit_code(),
            exit::ALREADY_EXISTS
        );
        assert_eq!(CliError::RosterMismatch("x".into()).exit_code(), exit::FAILURE);
    }
}
