//! Least-squares strength estimates: average score, OPR/OPRC and WMPR/WMPRC.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::design::{CollapsedDesign, DesignSystem, MatchSelection};
use crate::domain::{DivisionSnapshot, ModelKind, ALLIANCE_SIZE};
use crate::error::{Error, Result};
use crate::linalg::{LeastSquares, RankDeficiency};
use crate::partition::Partition;

/// Summed alliance score of each robot divided by three times its number of
/// matches.
pub fn average_score(snapshot: &DivisionSnapshot, selection: MatchSelection) -> Result<Vec<f64>> {
    let k = snapshot.num_robots();
    let mut points = vec![0.0; k];
    let mut played = vec![0usize; k];
    for m in selection.select(snapshot) {
        for &i in &m.blue {
            points[i] += f64::from(m.blue_score);
            played[i] += 1;
        }
        for &i in &m.red {
            points[i] += f64::from(m.red_score);
            played[i] += 1;
        }
    }
    points
        .iter()
        .zip(&played)
        .enumerate()
        .map(|(i, (&p, &n))| {
            if n == 0 {
                Err(Error::RobotNeverPlayed(i))
            } else {
                Ok(p / (ALLIANCE_SIZE * n) as f64)
            }
        })
        .collect()
}

/// Coefficients, expanded strengths and residuals of one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub kind: ModelKind,
    pub clusters: usize,
    pub partition: Partition,
    /// One coefficient per cluster.
    pub beta: Vec<f64>,
    /// Per-robot strengths, `beta[partition.label(i)]`.
    pub strengths: Vec<f64>,
    /// Margin residuals, one per match:
    /// `(red − blue score) − (red − blue collapsed row)·beta`.
    pub residuals: Vec<f64>,
    /// Residuals of the fitted design rows (`2M` for OPR, `M` for WMPR).
    pub row_residuals: Vec<f64>,
    /// Residual sum of squares over `M* − rank`; absent when no degrees of
    /// freedom remain.
    pub sigma2: Option<f64>,
}

impl FittedModel {
    /// Predicted red-minus-blue margin.
    pub fn predict_margin(&self, blue: &[usize], red: &[usize]) -> f64 {
        let total = |ids: &[usize]| ids.iter().map(|&i| self.strengths[i]).sum::<f64>();
        total(red) - total(blue)
    }

    pub fn num_robots(&self) -> usize {
        self.strengths.len()
    }
}

/// A fit together with the design and factorization it came from, which the
/// leave-one-out downdates need.
#[derive(Debug, Clone)]
pub struct ClusteredFit {
    pub model: FittedModel,
    pub design: CollapsedDesign,
    pub(crate) solution: LeastSquares,
}

impl ClusteredFit {
    pub fn solution(&self) -> &LeastSquares {
        &self.solution
    }
}

/// OPRC least squares `β̂ = (X^(c)ᵀX^(c))⁻¹X^(c)ᵀY`; with singleton clusters
/// this is plain OPR.
pub fn fit_opr_clustered(design: CollapsedDesign) -> Result<ClusteredFit> {
    if design.kind() != ModelKind::Opr {
        return Err(Error::InvalidArgument("expected an OPR design".into()));
    }
    fit_clustered(design)
}

/// WMPRC least squares under `Σ_i β̃_i = 0`: solve against the constrained
/// columns, then recover the eliminated cluster. One cluster gives zero.
pub fn fit_wmpr_clustered(design: CollapsedDesign) -> Result<ClusteredFit> {
    if design.kind() != ModelKind::Wmpr {
        return Err(Error::InvalidArgument("expected a WMPR design".into()));
    }
    fit_clustered(design)
}

/// Fits either kind.
pub fn fit_clustered(design: CollapsedDesign) -> Result<ClusteredFit> {
    let base = &design.base;
    let solution = LeastSquares::solve(design.solve_matrix(), &base.response)
        .map_err(|deficiency| rank_error(&design, deficiency))?;

    let beta = coefficients_from_solution(&design, solution.coef.as_slice());
    let residuals = margin_residuals(&design, &beta);
    let strengths = design.partition.expand(&beta);
    let dof = base.num_rows().saturating_sub(solution.rank());
    let sigma2 = (dof > 0).then(|| solution.residual_sum_of_squares() / dof as f64);

    let model = FittedModel {
        kind: base.kind,
        clusters: design.num_clusters(),
        partition: design.partition.clone(),
        beta,
        strengths,
        residuals: residuals.as_slice().to_vec(),
        row_residuals: solution.residuals.as_slice().to_vec(),
        sigma2,
    };
    Ok(ClusteredFit {
        model,
        design,
        solution,
    })
}

/// Fits with every robot in its own cluster.
pub fn fit_unclustered(base: Arc<DesignSystem>) -> Result<ClusteredFit> {
    let k = base.num_robots();
    fit_clustered(CollapsedDesign::new(base, Partition::singletons(k))?)
}

/// Maps a solution of the solve matrix to one coefficient per cluster.
pub(crate) fn coefficients_from_solution(design: &CollapsedDesign, coef: &[f64]) -> Vec<f64> {
    match &design.constrained {
        Some(con) => con.expand(coef, &design.cluster_sizes),
        None => coef.to_vec(),
    }
}

pub(crate) fn margin_residuals(design: &CollapsedDesign, beta: &[f64]) -> DVector<f64> {
    let beta = DVector::from_column_slice(beta);
    &design.base.margins - &design.margin_rows * beta
}

fn rank_error(design: &CollapsedDesign, deficiency: RankDeficiency) -> Error {
    let clusters: Vec<usize> = match &design.constrained {
        Some(con) => deficiency.dependent.iter().map(|&t| con.free[t]).collect(),
        None => deficiency.dependent.clone(),
    };
    let mut robots: Vec<usize> = clusters.iter().flat_map(|&j| design.partition.members(j)).collect();
    robots.sort_unstable();
    Error::RankDeficient {
        rank: deficiency.rank,
        columns: deficiency.columns,
        robots,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::design_from_matches;
    use crate::domain::{MatchRecord, RawMatch, RawSnapshot, Stage};
    use crate::validate_snapshot;

    fn record(no: u32, blue: [usize; 3], red: [usize; 3], bs: u32, rs: u32) -> MatchRecord {
        MatchRecord {
            match_no: no,
            stage: Stage::Qualification,
            blue,
            red,
            blue_score: bs,
            red_score: rs,
        }
    }

    #[allow(clippy::type_complexity)]
    fn snapshot(matches: &[(u32, [&str; 3], [&str; 3], i64, i64)]) -> DivisionSnapshot {
        let roster: Vec<String> = ["a", "b", "c", "d", "e", "f"].iter().map(|s| s.to_string()).collect();
        let raw = RawSnapshot {
            division_key: "t".into(),
            frc_ratings: roster.iter().map(|k| (k.clone(), 0.0)).collect(),
            roster,
            qual_matches: matches
                .iter()
                .map(|(no, b, r, bs, rs)| RawMatch {
                    match_no: *no,
                    blue: b.iter().map(|s| s.to_string()).collect(),
                    red: r.iter().map(|s| s.to_string()).collect(),
                    blue_score: *bs,
                    red_score: *rs,
                })
                .collect(),
            playoff_matches: vec![],
            playoff_roster: vec![],
        };
        validate_snapshot(&raw).unwrap()
    }

    #[test]
    fn average_score_one_and_two_matches() {
        let snap = snapshot(&[(1, ["a", "b", "c"], ["d", "e", "f"], 30, 0)]);
        let avg = average_score(&snap, MatchSelection::Qualification).unwrap();
        assert_eq!(avg[0], 10.0);
        assert_eq!(avg[3], 0.0);

        let snap = snapshot(&[
            (1, ["a", "b", "c"], ["d", "e", "f"], 30, 12),
            (2, ["d", "b", "f"], ["a", "e", "c"], 0, 18),
        ]);
        let avg = average_score(&snap, MatchSelection::Qualification).unwrap();
        // a: 30 + 18; b: 30 + 0; d: 12 + 0; e: 12 + 18
        assert_eq!(avg, vec![8.0, 5.0, 8.0, 2.0, 5.0, 2.0]);
    }

    #[test]
    fn average_score_requires_every_robot_to_play() {
        let snap = snapshot(&[(1, ["a", "b", "c"], ["d", "e", "f"], 30, 0)]);
        let mut snap = snap;
        snap.roster.push(crate::RobotId {
            key: "g".into(),
            index: 6,
        });
        assert_eq!(
            average_score(&snap, MatchSelection::Qualification),
            Err(Error::RobotNeverPlayed(6))
        );
    }

    fn two_match_design(kind: ModelKind) -> Arc<DesignSystem> {
        let matches = vec![
            record(1, [0, 1, 2], [3, 4, 5], 10, 7),
            record(2, [0, 3, 4], [1, 2, 5], 20, 9),
        ];
        Arc::new(design_from_matches(kind, 6, &matches).unwrap())
    }

    #[test]
    fn single_cluster_opr_is_mean_alliance_score_over_three() {
        let base = two_match_design(ModelKind::Opr);
        let fit = fit_opr_clustered(CollapsedDesign::new(base, Partition::single_cluster(6)).unwrap()).unwrap();
        let expected = (10.0 + 7.0 + 20.0 + 9.0) / (6.0 * 2.0);
        assert!((fit.model.beta[0] - expected).abs() < 1e-12);
        assert!(fit.model.strengths.iter().all(|&b| b == fit.model.beta[0]));
        // collapsed margin row is zero, so the margin residual is the margin
        assert!((fit.model.residuals[0] - -3.0).abs() < 1e-12);
    }

    #[test]
    fn single_cluster_wmpr_is_zero() {
        let base = two_match_design(ModelKind::Wmpr);
        let fit = fit_wmpr_clustered(CollapsedDesign::new(base, Partition::single_cluster(6)).unwrap()).unwrap();
        assert_eq!(fit.model.beta, vec![0.0]);
        assert_eq!(fit.model.residuals, vec![-3.0, -11.0]);
    }

    #[test]
    fn all_ties_give_zero_wmpr() {
        let matches = vec![
            record(1, [0, 1, 2], [3, 4, 5], 5, 5),
            record(2, [0, 3, 4], [1, 2, 5], 9, 9),
            record(3, [0, 1, 5], [2, 3, 4], 0, 0),
        ];
        let base = Arc::new(design_from_matches(ModelKind::Wmpr, 6, &matches).unwrap());
        let fit = fit_wmpr_clustered(CollapsedDesign::new(base, Partition::new(&[0, 0, 1, 1, 2, 2])).unwrap()).unwrap();
        assert!(fit.model.beta.iter().all(|b| b.abs() < 1e-12));
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let base = two_match_design(ModelKind::Wmpr);
        let design = CollapsedDesign::new(base, Partition::single_cluster(6)).unwrap();
        assert!(matches!(fit_opr_clustered(design), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn unidentified_robots_reported() {
        // robots 0 and 1 always play together: their columns are identical
        let matches = vec![
            record(1, [0, 1, 2], [3, 4, 5], 10, 7),
            record(2, [0, 1, 3], [2, 4, 5], 20, 9),
        ];
        let base = Arc::new(design_from_matches(ModelKind::Opr, 6, &matches).unwrap());
        match fit_unclustered(base) {
            Err(Error::RankDeficient { robots, .. }) => {
                assert!(robots.contains(&0) && robots.contains(&1));
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }
}
