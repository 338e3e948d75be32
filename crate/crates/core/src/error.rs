use thiserror::Error;

use crate::domain::Stage;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("robot `{key}` appears more than once in the roster")]
    DuplicateRobot { key: String },

    #[error("match {match_no}: malformed alliance ({reason})")]
    MalformedAlliance { match_no: u32, reason: String },

    #[error("match {match_no}: robot `{key}` is not in the roster")]
    UnknownRobotInMatch { match_no: u32, key: String },

    #[error("match {match_no}: negative score")]
    NegativeScore { match_no: u32 },

    #[error("{stage:?} match number {match_no} appears more than once")]
    DuplicateMatch { stage: Stage, match_no: u32 },

    #[error("robot `{key}` has no official rating")]
    MissingRating { key: String },

    #[error("rating for `{key}` is not a finite number")]
    NonFiniteRating { key: String },

    #[error("playoff robot `{key}` is not in the roster")]
    UnknownPlayoffRobot { key: String },

    #[error("unknown robot `{0}`")]
    UnknownRobot(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("match selection is empty")]
    EmptySelection,

    #[error("cluster {0} has no members")]
    EmptyCluster(usize),

    #[error("cluster label {label} out of range for {clusters} clusters")]
    LabelOutOfRange { label: usize, clusters: usize },

    #[error("robot {0} never played in the selected matches")]
    RobotNeverPlayed(usize),

    /// The design has linearly dependent columns. `robots` lists the roster
    /// indices of every robot in a cluster that takes part in a dependency.
    #[error("design is rank deficient (rank {rank} < {columns} columns); robots involved: {robots:?}")]
    RankDeficient {
        rank: usize,
        columns: usize,
        robots: Vec<usize>,
    },

    #[error("match {0} is pivotal: removing it leaves the model unidentified")]
    LeverageSingular(u32),

    #[error("input contains a non-finite value")]
    NonFiniteInput,

    #[error("vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("model ranking has {available} entries, {requested} requested")]
    InsufficientRanking { available: usize, requested: usize },

    #[error("no playoff matches to evaluate")]
    EmptyPlayoff,

    #[error("need at least {needed} qualification matches, have {available}")]
    InsufficientMatches { needed: usize, available: usize },
}
