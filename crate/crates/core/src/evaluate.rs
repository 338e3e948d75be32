//! Agreement with official ratings and out-of-sample playoff accuracy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::DivisionSnapshot;
use crate::error::{Error, Result};
use crate::estimate::FittedModel;
use crate::select::{prediction_credit, win_probability, EmpiricalCdf};

/// Size of the official top set that recall is measured against.
pub const TOP_SET: usize = 8;

/// Fraction of ordered pairs `i ≠ j` on which `a` and `b` agree in
/// direction, with half credit when either is tied.
pub fn rank_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "rank correlation needs at least two entries".into(),
        ));
    }
    let mut score = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let product = (a[i] - a[j]).signum_or_zero() * (b[i] - b[j]).signum_or_zero();
            if product > 0.0 {
                score += 1.0;
            } else if product == 0.0 {
                score += 0.5;
            }
        }
    }
    Ok(score / (n * (n - 1)) as f64)
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    fn signum_or_zero(self) -> f64 {
        if self == 0.0 {
            0.0
        } else {
            self.signum()
        }
    }
}

/// Precision `#(top ∩ first N) / N` and recall `#(top ∩ first N) / 8`.
pub fn precision_recall(top: &[usize], ranking: &[usize], n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    if ranking.len() < n {
        return Err(Error::InsufficientRanking {
            available: ranking.len(),
            requested: n,
        });
    }
    let hits = ranking[..n].iter().filter(|i| top.contains(i)).count() as f64;
    Ok((hits / n as f64, hits / TOP_SET as f64))
}

/// Robots by descending strength; equal strengths fall back to the official
/// rating (higher first), then roster order.
pub fn model_top_ranking(fit: &FittedModel, frc_ratings: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fit.num_robots()).collect();
    order.sort_by(|&a, &b| {
        fit.strengths[b]
            .total_cmp(&fit.strengths[a])
            .then(frc_ratings[b].total_cmp(&frc_ratings[a]))
            .then(a.cmp(&b))
    });
    order
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayoffMetrics {
    pub matches: usize,
    pub prediction_rate: f64,
    pub mspe: f64,
}

/// Scores a qualification fit on the playoff matches, using the fit's own
/// residual CDF for win probabilities.
pub fn playoff_metrics(snapshot: &DivisionSnapshot, fit: &FittedModel) -> Result<PlayoffMetrics> {
    if snapshot.playoff_matches.is_empty() {
        return Err(Error::EmptyPlayoff);
    }
    let cdf = EmpiricalCdf::new(&fit.residuals)?;
    let mut credit = 0.0;
    let mut squared = 0.0;
    for m in &snapshot.playoff_matches {
        if let Some(&bad) = m.blue.iter().chain(&m.red).find(|&&i| i >= fit.num_robots()) {
            return Err(Error::UnknownRobot(snapshot.key(bad).to_string()));
        }
        let predicted = fit.predict_margin(&m.blue, &m.red);
        credit += prediction_credit(m.margin(), win_probability(predicted, &cdf));
        squared += (m.margin() - predicted).powi(2);
    }
    let n = snapshot.playoff_matches.len();
    Ok(PlayoffMetrics {
        matches: n,
        prediction_rate: credit / n as f64,
        mspe: squared / n as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub rc_all: f64,
    /// Over the playoff roster; absent with fewer than two playoff robots.
    pub rc_playoff: Option<f64>,
    /// Over the official top 8.
    pub rc_top8: Option<f64>,
    pub precision_at: BTreeMap<usize, f64>,
    pub recall_at: BTreeMap<usize, f64>,
}

/// Rank agreement between strengths and official ratings, and top-set
/// precision/recall at each `N` in `top_n`.
pub fn agreement(snapshot: &DivisionSnapshot, fit: &FittedModel, top_n: &[usize]) -> Result<AgreementReport> {
    if fit.num_robots() != snapshot.num_robots() {
        return Err(Error::LengthMismatch(fit.num_robots(), snapshot.num_robots()));
    }
    let ratings = &snapshot.frc_ratings;
    let subset_rc = |ids: &[usize]| -> Result<Option<f64>> {
        if ids.len() < 2 {
            return Ok(None);
        }
        let r: Vec<f64> = ids.iter().map(|&i| ratings[i]).collect();
        let b: Vec<f64> = ids.iter().map(|&i| fit.strengths[i]).collect();
        rank_correlation(&r, &b).map(Some)
    };

    let ranking = model_top_ranking(fit, ratings);
    let top = snapshot.frc_top8();
    let mut precision_at = BTreeMap::new();
    let mut recall_at = BTreeMap::new();
    for &n in top_n {
        if n > ranking.len() {
            continue;
        }
        let (p, r) = precision_recall(top, &ranking, n)?;
        precision_at.insert(n, p);
        recall_at.insert(n, r);
    }

    Ok(AgreementReport {
        rc_all: rank_correlation(ratings, &fit.strengths)?,
        rc_playoff: subset_rc(&snapshot.playoff_roster)?,
        rc_top8: subset_rc(top)?,
        precision_at,
        recall_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::Partition;
    use crate::ModelKind;

    #[test]
    fn rank_correlation_extremes() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(rank_correlation(&a, &a).unwrap(), 1.0);
        assert_eq!(rank_correlation(&a, &[4.0, 3.0, 2.0, 1.0]).unwrap(), 0.0);
        assert_eq!(rank_correlation(&a, &[7.0; 4]).unwrap(), 0.5);
        assert_eq!(rank_correlation(&a, &[1.0]), Err(Error::LengthMismatch(4, 1)));
    }

    #[test]
    fn rank_correlation_partial_ties() {
        // pairs (0,1) tied in b: 2 ordered pairs at 0.5, the other 4 concordant
        let v = rank_correlation(&[1.0, 2.0, 3.0], &[0.0, 0.0, 5.0]).unwrap();
        assert!((v - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn precision_recall_cases() {
        let top: Vec<usize> = (0..8).collect();
        assert_eq!(precision_recall(&top, &top, 8).unwrap(), (1.0, 1.0));
        let other: Vec<usize> = (8..24).collect();
        assert_eq!(precision_recall(&top, &other, 8).unwrap(), (0.0, 0.0));
        let mut sixteen: Vec<usize> = (8..16).collect();
        sixteen.extend(0..8);
        assert_eq!(precision_recall(&top, &sixteen, 16).unwrap(), (0.5, 1.0));
        assert_eq!(
            precision_recall(&top, &top, 9),
            Err(Error::InsufficientRanking {
                available: 8,
                requested: 9
            })
        );
    }

    fn fit_with(strengths: Vec<f64>) -> FittedModel {
        FittedModel {
            kind: ModelKind::Opr,
            clusters: strengths.len(),
            partition: Partition::singletons(strengths.len()),
            beta: strengths.clone(),
            strengths,
            residuals: vec![0.0],
            row_residuals: vec![0.0],
            sigma2: None,
        }
    }

    #[test]
    fn ranking_tie_breaks() {
        let ratings = [-3.0, -1.0, -2.0, -4.0];
        assert_eq!(
            model_top_ranking(&fit_with(vec![1.0, 4.0, 3.0, 2.0]), &ratings),
            vec![1, 2, 3, 0]
        );
        assert_eq!(model_top_ranking(&fit_with(vec![5.0; 4]), &ratings), vec![1, 2, 0, 3]);
        // equal ratings fall back to roster order
        assert_eq!(model_top_ranking(&fit_with(vec![0.0; 3]), &[0.0; 3]), vec![0, 1, 2]);
    }

    #[test]
    fn top_cluster_tie_uses_official_rating() {
        // ten robots share the top strength; official ranks pick the eight
        let mut strengths = vec![10.0; 10];
        strengths.extend([1.0; 4]);
        let ratings: Vec<f64> = (0..14).map(|i| -(((i * 5) % 14) as f64)).collect();
        let ranking = model_top_ranking(&fit_with(strengths), &ratings);
        let mut first8: Vec<usize> = ranking[..8].to_vec();
        first8.sort_unstable();
        let mut expected: Vec<usize> = (0..10).collect();
        expected.sort_by(|&a, &b| ratings[b].total_cmp(&ratings[a]));
        let mut expected = expected[..8].to_vec();
        expected.sort_unstable();
        assert_eq!(first8, expected);
    }
}
