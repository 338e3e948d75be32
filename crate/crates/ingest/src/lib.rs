//! Getting division data in and out of snapshot files.
//!
//! A snapshot file is a single JSON document (`schema_version` 1) holding a
//! division's roster, matches and official rankings. Files come from The
//! Blue Alliance ([`TbaClient`]), from CSV exports ([`import_csv`]), or from
//! code ([`SnapshotFile::new`]); [`load_snapshot`] reads one back into a
//! validated [`frc_core::DivisionSnapshot`].

mod csv_import;
mod error;
mod snapshot_file;
pub mod tba;

pub use csv_import::{import_csv, parse_stage};
pub use error::{IngestError, Result};
pub use snapshot_file::{load_snapshot, read_snapshot_file, save_snapshot, write_atomic, SnapshotFile, SCHEMA_VERSION};
pub use tba::{AuthToken, FixtureTransport, HttpTransport, RecordingTransport, TbaClient, Transport};
