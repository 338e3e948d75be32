//! The on-disk snapshot: one self-describing JSON document per division.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Utc};
use frc_core::{validate_snapshot, DivisionSnapshot, RawMatch, RawSnapshot};
use serde::{Deserialize, Serialize};

use crate::error::{IngestError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotFile {
    pub schema_version: u32,
    pub division_key: String,
    pub fetched_at: DateTime<Utc>,
    pub roster: Vec<String>,
    pub qual_matches: Vec<RawMatch>,
    pub playoff_matches: Vec<RawMatch>,
    pub frc_ratings: BTreeMap<String, f64>,
    pub playoff_roster: Vec<String>,
    /// The rankings payload as received, kept for audit only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rankings_audit: Option<serde_json::Value>,
}

impl SnapshotFile {
    pub fn new(snapshot: &DivisionSnapshot, fetched_at: DateTime<Utc>) -> Self {
        Self::from_raw(snapshot.to_raw(), fetched_at)
    }

    pub fn from_raw(raw: RawSnapshot, fetched_at: DateTime<Utc>) -> Self {
        SnapshotFile {
            schema_version: SCHEMA_VERSION,
            division_key: raw.division_key,
            fetched_at,
            roster: raw.roster,
            qual_matches: raw.qual_matches,
            playoff_matches: raw.playoff_matches,
            frc_ratings: raw.frc_ratings,
            playoff_roster: raw.playoff_roster,
            rankings_audit: None,
        }
    }

    pub fn raw(&self) -> RawSnapshot {
        RawSnapshot {
            division_key: self.division_key.clone(),
            roster: self.roster.clone(),
            qual_matches: self.qual_matches.clone(),
            playoff_matches: self.playoff_matches.clone(),
            frc_ratings: self.frc_ratings.clone(),
            playoff_roster: self.playoff_roster.clone(),
        }
    }

    pub fn validate(&self) -> Result<DivisionSnapshot> {
        Ok(validate_snapshot(&self.raw())?)
    }

    /// Pretty-printed JSON with a trailing newline; the exact bytes written
    /// by [`save_snapshot`].
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("snapshot serializes");
        out.push(b'\n');
        out
    }

    /// Parses and version-checks a snapshot document. `path` only labels
    /// errors.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Version {
            schema_version: Option<serde_json::Value>,
        }

        let located = |e: serde_json::Error| IngestError::Io {
            path: path.to_path_buf(),
            offset: Some(if e.is_eof() {
                bytes.len() as u64
            } else {
                byte_offset(bytes, e.line(), e.column())
            }),
            reason: e.to_string(),
        };
        // Check the version before the shape, so an old file reports the
        // version rather than whichever field changed.
        let version: Version = serde_json::from_slice(bytes).map_err(located)?;
        match version.schema_version.as_ref().and_then(|v| v.as_i64()) {
            Some(v) if v == i64::from(SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(IngestError::SchemaVersionMismatch {
                    found: v,
                    expected: SCHEMA_VERSION,
                })
            }
            None => {
                return Err(IngestError::Io {
                    path: path.to_path_buf(),
                    offset: None,
                    reason: "missing integer `schema_version`".into(),
                })
            }
        }
        serde_json::from_slice(bytes).map_err(located)
    }
}

/// Converts serde_json's 1-based line/column into a byte offset.
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> u64 {
    let line_start: usize = bytes
        .split_inclusive(|&b| b == b'\n')
        .take(line.saturating_sub(1))
        .map(<[u8]>::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(bytes.len()) as u64
}

pub fn read_snapshot_file(path: &Path) -> Result<SnapshotFile> {
    let bytes = std::fs::read(path).map_err(|e| IngestError::io(path, e))?;
    SnapshotFile::from_bytes(&bytes, path)
}

/// Reads, version-checks and validates a snapshot file.
pub fn load_snapshot(path: &Path) -> Result<DivisionSnapshot> {
    read_snapshot_file(path)?.validate()
}

/// Writes `file` to `path` through a temporary file in the same directory
/// and a rename, so readers never see a partial snapshot. With `overwrite`
/// false an existing `path` is left untouched and reported.
pub fn save_snapshot(file: &SnapshotFile, path: &Path, overwrite: bool) -> Result<()> {
    write_atomic(path, &file.to_bytes(), overwrite)
}

/// Replaces `path` with `bytes` via a same-directory temporary file and a
/// rename; refuses an existing `path` unless `overwrite`.
pub fn write_atomic(path: &Path, bytes: &[u8], overwrite: bool) -> Result<()> {
    if !overwrite && path.exists() {
        return Err(IngestError::AlreadyExists(path.to_path_buf()));
    }
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IngestError::io(dir, e))?;
    tmp.write_all(bytes)
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| IngestError::io(tmp.path(), e))?;
    let persisted = if overwrite {
        tmp.persist(path).map(|_| ())
    } else {
        tmp.persist_noclobber(path).map(|_| ())
    };
    persisted.map_err(|e| {
        if e.error.kind() == std::io::ErrorKind::AlreadyExists {
            IngestError::AlreadyExists(path.to_path_buf())
        } else {
            IngestError::io(path, e.error)
        }
    })
}
