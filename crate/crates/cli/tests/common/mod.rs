#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::DateTime;
use frc_core::synthetic::{clustered_strengths, generate, SyntheticConfig};
use frc_core::{validate_snapshot, DivisionSnapshot, Partition, RawSnapshot};
use frc_ingest::{save_snapshot, SnapshotFile};

pub fn binary() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_frc-strength"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    binary().args(args).output().expect("binary runs")
}

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../ingest/tests/fixtures/2018demo")
}

pub fn write_snapshot(dir: &Path, name: &str, snapshot: &DivisionSnapshot) -> PathBuf {
    let path = dir.join(name);
    save_snapshot(&SnapshotFile::new(snapshot, DateTime::UNIX_EPOCH), &path, true).unwrap();
    path
}

/// A division with robots at the given strength levels, spread evenly.
pub fn clustered_division(
    robots: usize,
    levels: &[f64],
    plays: usize,
    noise: f64,
    playoffs: usize,
    seed: u64,
) -> (DivisionSnapshot, Partition) {
    let (strengths, truth) = clustered_strengths(robots, levels, seed);
    let division = generate(&SyntheticConfig {
        strengths,
        plays,
        noise_sd: noise,
        playoff_matches: playoffs,
        seed,
    })
    .unwrap();
    (division.snapshot, truth)
}

pub fn reparse(raw: &RawSnapshot) -> DivisionSnapshot {
    validate_snapshot(raw).unwrap()
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

pub fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}
