//! How estimates and predictive accuracy change as the qualification
//! schedule grows.
//!
//! The cluster count and partition are chosen once from all qualification
//! matches. For `ℓ = 6..m₀`, where `m₀` is the largest number of plays per
//! robot the schedule covers, the clustered model is refit on the first
//! `ceil(ℓK/6)` matches (all matches at `ℓ = m₀`) and cross-validated.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{build_design, match_count, CollapsedDesign, MatchSelection};
use crate::domain::DivisionSnapshot;
use crate::error::{Error, Result};
use crate::estimate::{fit_clustered, FittedModel};
use crate::evaluate::{model_top_ranking, rank_correlation, TOP_SET};
use crate::partition::Partition;
use crate::procedure::Procedure;
use crate::select::{cross_validate, Criterion};

/// Smallest number of plays per robot in the suite.
pub const FIRST_PLAYS: usize = 6;

/// Which robots the top-8 stability comparison follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopSetRule {
    /// The model's top 8 on all qualification matches.
    #[default]
    FullFit,
    /// The model's top 8 on the shorter prefix of each consecutive pair.
    PerPrefix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub plays: usize,
    pub matches: usize,
    pub prediction_rate: Option<f64>,
    pub mspe: Option<f64>,
    pub strengths: Option<Vec<f64>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub procedure: String,
    pub criterion: Criterion,
    pub clusters: usize,
    pub partition: Partition,
    pub max_plays: usize,
    pub top_set_rule: TopSetRule,
    /// Top 8 of the full-data fit.
    pub top8: Vec<usize>,
    /// `plays = 6..=max_plays`.
    pub rows: Vec<StabilityRow>,
    /// `RC(β̃_[ℓ], β̃_[ℓ+1])` for `ℓ = 6..max_plays`.
    pub rc_consecutive: Vec<Option<f64>>,
    pub rc_top8_consecutive: Vec<Option<f64>>,
}

/// Largest `ℓ` whose schedule length fits in the recorded matches.
pub fn max_plays(robots: usize, matches: usize) -> Result<usize> {
    let mut plays = 0;
    while match_count(robots, plays + 1)? <= matches {
        plays += 1;
    }
    Ok(plays)
}

pub fn stability_suite(
    snapshot: &DivisionSnapshot,
    procedure: &dyn Procedure,
    criterion: Criterion,
    rule: TopSetRule,
) -> Result<StabilityReport> {
    let k = snapshot.num_robots();
    let m = snapshot.qual_matches.len();
    let needed = match_count(k, FIRST_PLAYS)?;
    if m < needed {
        return Err(Error::InsufficientMatches { needed, available: m });
    }
    let m0 = max_plays(k, m)?;

    let full = build_design(snapshot, procedure.kind(), MatchSelection::Qualification)?;
    let selection = procedure.select(Arc::new(full), criterion)?;
    let partition = selection.fit.model.partition.clone();
    let top8: Vec<usize> = model_top_ranking(&selection.fit.model, &snapshot.frc_ratings)
        .into_iter()
        .take(TOP_SET)
        .collect();

    let prefixes = (FIRST_PLAYS..=m0)
        .map(|plays| Ok((plays, if plays == m0 { m } else { match_count(k, plays)? })))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<(StabilityRow, Option<FittedModel>)> = prefixes
        .into_par_iter()
        .map(|(plays, matches)| {
            let outcome = build_design(snapshot, procedure.kind(), MatchSelection::QualificationPrefix(matches))
                .and_then(|d| CollapsedDesign::new(Arc::new(d), partition.clone()))
                .and_then(fit_clustered)
                .and_then(|fit| Ok((cross_validate(&fit)?, fit)));
            match outcome {
                Ok((cv, fit)) => (
                    StabilityRow {
                        plays,
                        matches,
                        prediction_rate: Some(cv.prediction_rate),
                        mspe: cv.mspe,
                        strengths: Some(fit.model.strengths.clone()),
                        error: None,
                    },
                    Some(fit.model),
                ),
                Err(e) => (
                    StabilityRow {
                        plays,
                        matches,
                        prediction_rate: None,
                        mspe: None,
                        strengths: None,
                        error: Some(e.to_string()),
                    },
                    None,
                ),
            }
        })
        .collect();

    let mut rc_consecutive = Vec::new();
    let mut rc_top8_consecutive = Vec::new();
    for pair in rows.windows(2) {
        let (Some(a), Some(b)) = (&pair[0].1, &pair[1].1) else {
            rc_consecutive.push(None);
            rc_top8_consecutive.push(None);
            continue;
        };
        rc_consecutive.push(Some(rank_correlation(&a.strengths, &b.strengths)?));
        let robots: Vec<usize> = match rule {
            TopSetRule::FullFit => top8.clone(),
            TopSetRule::PerPrefix => model_top_ranking(a, &snapshot.frc_ratings)
                .into_iter()
                .take(TOP_SET)
                .collect(),
        };
        let pick = |f: &FittedModel| robots.iter().map(|&i| f.strengths[i]).collect::<Vec<_>>();
        rc_top8_consecutive.push(if robots.len() >= 2 {
            Some(rank_correlation(&pick(a), &pick(b))?)
        } else {
            None
        });
    }

    Ok(StabilityReport {
        procedure: procedure.name().to_string(),
        criterion,
        clusters: selection.clusters,
        partition,
        max_plays: m0,
        top_set_rule: rule,
        top8,
        rows: rows.into_iter().map(|(row, _)| row).collect(),
        rc_consecutive,
        rc_top8_consecutive,
    })
}
