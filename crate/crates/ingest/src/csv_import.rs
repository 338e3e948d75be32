//! Division data from two local CSV files.
//!
//! Matches: `match_no,stage,blue1,blue2,blue3,red1,red2,red3,blue_score,red_score`,
//! where `stage` is `qualification`/`qual`/`qm` or `playoff`/`elim` (or a
//! playoff level `ef`, `qf`, `sf`, `f`). Rankings: `team,rank`, rank 1 best.
//!
//! The roster is the rankings file in order. The playoff roster is every
//! robot that appears in a playoff match, best official rank first, so the
//! top eight stand in for the alliance captains.

use std::collections::BTreeMap;
use std::path::Path;

use frc_core::{validate_snapshot, DivisionSnapshot, RawMatch, RawSnapshot, Stage};

use crate::error::{IngestError, Result};

const MATCH_COLUMNS: [&str; 10] = [
    "match_no",
    "stage",
    "blue1",
    "blue2",
    "blue3",
    "red1",
    "red2",
    "red3",
    "blue_score",
    "red_score",
];
const RANK_COLUMNS: [&str; 2] = ["team", "rank"];

pub fn parse_stage(value: &str) -> Option<Stage> {
    match value.trim().to_ascii_lowercase().as_str() {
        "qualification" | "qual" | "qm" => Some(Stage::Qualification),
        "playoff" | "elim" | "elimination" | "ef" | "qf" | "sf" | "f" => Some(Stage::Playoff),
        _ => None,
    }
}

struct Table {
    path: std::path::PathBuf,
    columns: Vec<usize>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path, expected: &[&str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| IngestError::io(path, e))?;
        let headers = reader.headers().map_err(|e| IngestError::io(path, e))?.clone();
        let columns = expected
            .iter()
            .map(|&name| {
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| IngestError::ParseError {
                        path: path.to_path_buf(),
                        row: 1,
                        column: name.to_string(),
                        reason: "missing column in header".into(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                let row = e.position().map_or(0, |p| p.line());
                IngestError::ParseError {
                    path: path.to_path_buf(),
                    row,
                    column: String::new(),
                    reason: e.to_string(),
                }
            })?;
            let line = record.position().map_or(0, |p| p.line());
            rows.push((line, record));
        }
        Ok(Table {
            path: path.to_path_buf(),
            columns,
            rows,
        })
    }

    /// Cell `col` (index into the expected columns) of row `r`, parsed.
    fn cell<T: std::str::FromStr>(&self, r: usize, col: usize, names: &[&str]) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let (line, record) = &self.rows[r];
        let raw = record.get(self.columns[col]).unwrap_or("");
        raw.parse().map_err(|e: T::Err| IngestError::ParseError {
            path: self.path.clone(),
            row: *line,
            column: names[col].to_string(),
            reason: format!("`{raw}`: {e}"),
        })
    }
}

/// Reads a matches file and a rankings file into a validated snapshot.
pub fn import_csv(matches_path: &Path, rankings_path: &Path, division_key: &str) -> Result<DivisionSnapshot> {
    let ranks = Table::read(rankings_path, &RANK_COLUMNS)?;
    let mut roster = Vec::with_capacity(ranks.rows.len());
    let mut frc_ratings = BTreeMap::new();
    for r in 0..ranks.rows.len() {
        let team: String = ranks.cell(r, 0, &RANK_COLUMNS)?;
        let rank: u32 = ranks.cell(r, 1, &RANK_COLUMNS)?;
        frc_ratings.insert(team.clone(), -f64::from(rank));
        roster.push(team);
    }

    let table = Table::read(matches_path, &MATCH_COLUMNS)?;
    let mut qual_matches = Vec::new();
    let mut playoff_matches = Vec::new();
    let mut playoff_roster: Vec<String> = Vec::new();
    for r in 0..table.rows.len() {
        let stage_text: String = table.cell(r, 1, &MATCH_COLUMNS)?;
        let stage = parse_stage(&stage_text).ok_or_else(|| IngestError::ParseError {
            path: table.path.clone(),
            row: table.rows[r].0,
            column: "stage".into(),
            reason: format!("`{stage_text}` is not a known stage"),
        })?;
        let team = |c: usize| table.cell::<String>(r, c, &MATCH_COLUMNS);
        let m = RawMatch {
            match_no: table.cell(r, 0, &MATCH_COLUMNS)?,
            blue: vec![team(2)?, team(3)?, team(4)?],
            red: vec![team(5)?, team(6)?, team(7)?],
            blue_score: table.cell(r, 8, &MATCH_COLUMNS)?,
            red_score: table.cell(r, 9, &MATCH_COLUMNS)?,
        };
        match stage {
            Stage::Qualification => qual_matches.push(m),
            Stage::Playoff => {
                for key in m.blue.iter().chain(&m.red) {
                    if !playoff_roster.contains(key) {
                        playoff_roster.push(key.clone());
                    }
                }
                playoff_matches.push(m);
            }
        }
    }

    // stable: robots missing a rank keep appearance order and fail validation later
    playoff_roster.sort_by(|a, b| {
        let rating = |k: &String| frc_ratings.get(k).copied().unwrap_or(f64::NEG_INFINITY);
        rating(b).total_cmp(&rating(a))
    });

    let raw = RawSnapshot {
        division_key: division_key.to_string(),
        roster,
        qual_matches,
        playoff_matches,
        frc_ratings,
        playoff_roster,
    };
    Ok(validate_snapshot(&raw)?)
}
