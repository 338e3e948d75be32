use std::path::PathBuf;
use std::time::Duration;

pub type Result<T, E = IngestError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    /// Reading or writing failed; `offset` is the byte position of a parse
    /// failure when the file was readable but malformed or truncated.
    #[error("{}: {reason}{}", path.display(), offset.map(|o| format!(" (at byte {o})")).unwrap_or_default())]
    Io {
        path: PathBuf,
        offset: Option<u64>,
        reason: String,
    },

    #[error("{} already exists", .0.display())]
    AlreadyExists(PathBuf),

    #[error("snapshot schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: i64, expected: u32 },

    #[error("snapshot failed validation: {0}")]
    ValidationFailed(#[from] frc_core::Error),

    #[error("{}: row {row}, column `{column}`: {reason}", path.display())]
    ParseError {
        path: PathBuf,
        row: u64,
        column: String,
        reason: String,
    },

    #[error("authentication failed: {0}")]
    AuthFailed(String),

    #[error("event `{0}` not found")]
    EventNotFound(String),

    #[error("rate limited{}", .retry_after.map(|d| format!("; retry after {}s", d.as_secs())).unwrap_or_default())]
    RateLimited { retry_after: Option<Duration> },

    /// The response parsed as JSON but lacked an expected field.
    #[error("unexpected payload from {endpoint}: missing or malformed `{field}`")]
    SchemaDrift { endpoint: String, field: String },

    #[error("request to {url} failed: {reason}")]
    Http { url: String, reason: String },
}

impl IngestError {
    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        IngestError::Io {
            path: path.into(),
            offset: None,
            reason: err.to_string(),
        }
    }
}
