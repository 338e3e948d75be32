//! Validated division data shared by every other module.
//!
//! Raw records ([`RawSnapshot`]) identify robots by key; validation resolves
//! those keys to roster positions and checks alliance structure, so every
//! downstream computation can index robots by `usize`.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of robots on one alliance in a match.
pub const ALLIANCE_SIZE: usize = 3;

/// A robot's key and its position within the division roster.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RobotId {
    pub key: String,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Qualification,
    Playoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Additive contributions to the robot's own alliance score.
    Opr,
    /// Contributions to the winning margin, identified by a sum-zero constraint.
    Wmpr,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Opr => "opr",
            ModelKind::Wmpr => "wmpr",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One match with robots resolved to roster indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub match_no: u32,
    pub stage: Stage,
    pub blue: [usize; ALLIANCE_SIZE],
    pub red: [usize; ALLIANCE_SIZE],
    pub blue_score: u32,
    pub red_score: u32,
}

impl MatchRecord {
    /// Red score minus blue score.
    pub fn margin(&self) -> f64 {
        f64::from(self.red_score) - f64::from(self.blue_score)
    }

    pub fn red_won(&self) -> bool {
        self.red_score > self.blue_score
    }

    pub fn involves(&self, robot: usize) -> bool {
        self.blue.contains(&robot) || self.red.contains(&robot)
    }
}

/// A match as recorded in a snapshot file or import, robots given by key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawMatch {
    pub match_no: u32,
    pub blue: Vec<String>,
    pub red: Vec<String>,
    pub blue_score: i64,
    pub red_score: i64,
}

/// Unvalidated division data, field names as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSnapshot {
    pub division_key: String,
    pub roster: Vec<String>,
    pub qual_matches: Vec<RawMatch>,
    pub playoff_matches: Vec<RawMatch>,
    pub frc_ratings: BTreeMap<String, f64>,
    pub playoff_roster: Vec<String>,
}

/// A validated division: roster, qualification and playoff matches, and
/// official ratings (larger is better).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisionSnapshot {
    pub division_key: String,
    pub roster: Vec<RobotId>,
    /// Sorted by ascending `match_no`.
    pub qual_matches: Vec<MatchRecord>,
    pub playoff_matches: Vec<MatchRecord>,
    /// Indexed by roster position.
    pub frc_ratings: Vec<f64>,
    /// Roster indices; the first eight are the top-8 alliance captains.
    pub playoff_roster: Vec<usize>,
}

impl DivisionSnapshot {
    pub fn num_robots(&self) -> usize {
        self.roster.len()
    }

    pub fn key(&self, index: usize) -> &str {
        &self.roster[index].key
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.roster.iter().position(|r| r.key == key)
    }

    /// Resolves a key to its roster index.
    pub fn resolve(&self, key: &str) -> Result<usize> {
        self.index_of(key).ok_or_else(|| Error::UnknownRobot(key.to_string()))
    }

    /// The robots whose official ranking put them at the top of the playoff
    /// roster (at most eight).
    pub fn frc_top8(&self) -> &[usize] {
        &self.playoff_roster[..self.playoff_roster.len().min(8)]
    }

    /// Converts back to the key-based form; `validate_snapshot` of the result
    /// reproduces `self`.
    pub fn to_raw(&self) -> RawSnapshot {
        let keys = |ids: &[usize]| ids.iter().map(|&i| self.key(i).to_string()).collect();
        let raw_match = |m: &MatchRecord| RawMatch {
            match_no: m.match_no,
            blue: keys(&m.blue),
            red: keys(&m.red),
            blue_score: i64::from(m.blue_score),
            red_score: i64::from(m.red_score),
        };
        RawSnapshot {
            division_key: self.division_key.clone(),
            roster: self.roster.iter().map(|r| r.key.clone()).collect(),
            qual_matches: self.qual_matches.iter().map(raw_match).collect(),
            playoff_matches: self.playoff_matches.iter().map(raw_match).collect(),
            frc_ratings: self
                .roster
                .iter()
                .map(|r| (r.key.clone(), self.frc_ratings[r.index]))
                .collect(),
            playoff_roster: keys(&self.playoff_roster),
        }
    }
}

/// Checks every structural invariant and resolves robot keys to roster
/// indices. Qualification matches are ordered by `match_no`; playoff
/// matches keep their recorded order.
pub fn validate_snapshot(raw: &RawSnapshot) -> Result<DivisionSnapshot> {
    let mut lookup = HashMap::with_capacity(raw.roster.len());
    let mut roster = Vec::with_capacity(raw.roster.len());
    for (index, key) in raw.roster.iter().enumerate() {
        if lookup.insert(key.as_str(), index).is_some() {
            return Err(Error::DuplicateRobot { key: key.clone() });
        }
        roster.push(RobotId {
            key: key.clone(),
            index,
        });
    }

    let mut qual_matches = resolve_matches(&raw.qual_matches, Stage::Qualification, &lookup)?;
    qual_matches.sort_by_key(|m| m.match_no);
    let playoff_matches = resolve_matches(&raw.playoff_matches, Stage::Playoff, &lookup)?;

    let mut frc_ratings = Vec::with_capacity(roster.len());
    for key in &raw.roster {
        let rating = *raw
            .frc_ratings
            .get(key)
            .ok_or_else(|| Error::MissingRating { key: key.clone() })?;
        if !rating.is_finite() {
            return Err(Error::NonFiniteRating { key: key.clone() });
        }
        frc_ratings.push(rating);
    }

    let mut seen = HashSet::new();
    let mut playoff_roster = Vec::with_capacity(raw.playoff_roster.len());
    for key in &raw.playoff_roster {
        let index = *lookup
            .get(key.as_str())
            .ok_or_else(|| Error::UnknownPlayoffRobot { key: key.clone() })?;
        if !seen.insert(index) {
            return Err(Error::DuplicateRobot { key: key.clone() });
        }
        playoff_roster.push(index);
    }

    Ok(DivisionSnapshot {
        division_key: raw.division_key.clone(),
        roster,
        qual_matches,
        playoff_matches,
        frc_ratings,
        playoff_roster,
    })
}

fn resolve_matches(raw: &[RawMatch], stage: Stage, lookup: &HashMap<&str, usize>) -> Result<Vec<MatchRecord>> {
    let mut numbers = HashSet::with_capacity(raw.len());
    raw.iter()
        .map(|m| {
            if !numbers.insert(m.match_no) {
                return Err(Error::DuplicateMatch {
                    stage,
                    match_no: m.match_no,
                });
            }
            resolve_match(m, stage, lookup)
        })
        .collect()
}

fn resolve_match(raw: &RawMatch, stage: Stage, lookup: &HashMap<&str, usize>) -> Result<MatchRecord> {
    let match_no = raw.match_no;
    if match_no == 0 {
        return Err(Error::InvalidArgument(format!(
            "{stage:?} match number must be at least 1"
        )));
    }
    let alliance = |keys: &[String], colour: &str| -> Result<[usize; ALLIANCE_SIZE]> {
        if keys.len() != ALLIANCE_SIZE {
            return Err(Error::MalformedAlliance {
                match_no,
                reason: format!("{colour} alliance has {} robots", keys.len()),
            });
        }
        let mut out = [0; ALLIANCE_SIZE];
        for (slot, key) in out.iter_mut().zip(keys) {
            *slot = *lookup.get(key.as_str()).ok_or_else(|| Error::UnknownRobotInMatch {
                match_no,
                key: key.clone(),
            })?;
        }
        Ok(out)
    };
    let blue = alliance(&raw.blue, "blue")?;
    let red = alliance(&raw.red, "red")?;

    let mut members = HashSet::new();
    for (&index, key) in blue.iter().chain(&red).zip(raw.blue.iter().chain(&raw.red)) {
        if !members.insert(index) {
            return Err(Error::MalformedAlliance {
                match_no,
                reason: format!("robot `{key}` listed twice"),
            });
        }
    }

    let score = |s: i64| u32::try_from(s).map_err(|_| Error::NegativeScore { match_no });
    Ok(MatchRecord {
        match_no,
        stage,
        blue,
        red,
        blue_score: score(raw.blue_score)?,
        red_score: score(raw.red_score)?,
    })
}
