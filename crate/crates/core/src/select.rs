//! Leave-one-match-out cross-validation and cluster-count selection.
//!
//! Deleting a match removes two design rows under OPR (its blue and red
//! alliance rows) and one under WMPR. Both downdates are closed form in the
//! hat-matrix entries of the full fit, so no refit is needed per match.
//!
//! The held-out win probability uses the empirical CDF of the other `M − 1`
//! margin residuals, recomputed under the held-out coefficients.

use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{centroid_hierarchy, single_merge};
use crate::design::{CollapsedDesign, DesignSystem, MatchSelection};
use crate::domain::{DivisionSnapshot, ModelKind};
use crate::error::{Error, Result};
use crate::estimate::{coefficients_from_solution, fit_clustered, fit_unclustered, ClusteredFit, FittedModel};
use crate::partition::Partition;

/// Below this, a leave-one-out denominator counts as zero.
pub const LEVERAGE_TOLERANCE: f64 = 1e-10;

/// Step function `F̂(v) = #{e ≤ v} / n` over a fixed sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(residuals: &[f64]) -> Result<Self> {
        if residuals.is_empty() {
            return Err(Error::InvalidArgument("empirical CDF of an empty sample".into()));
        }
        if residuals.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        let mut sorted = residuals.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(EmpiricalCdf { sorted })
    }

    pub fn eval(&self, v: f64) -> f64 {
        self.sorted.partition_point(|&e| e <= v) as f64 / self.sorted.len() as f64
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted_residuals(&self) -> &[f64] {
        &self.sorted
    }
}

/// Empirical CDF of a set of residuals.
pub fn empirical_cdf(residuals: &[f64]) -> Result<EmpiricalCdf> {
    EmpiricalCdf::new(residuals)
}

/// `P(red wins) = 1 − F̂(−m)` for a predicted margin `m`.
pub fn win_probability(predicted_margin: f64, cdf: &EmpiricalCdf) -> f64 {
    1.0 - cdf.eval(-predicted_margin)
}

/// Red-win probability for two triples under `fit`; red is the predicted
/// winner when the result exceeds 0.5.
pub fn predict_win_prob(fit: &FittedModel, cdf: &EmpiricalCdf, blue: &[usize], red: &[usize]) -> Result<f64> {
    if let Some(&bad) = blue.iter().chain(red).find(|&&i| i >= fit.num_robots()) {
        return Err(Error::UnknownRobot(format!("#{bad}")));
    }
    Ok(win_probability(fit.predict_margin(blue, red), cdf))
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Credit for one prediction: 1 when the called winner won, 0.5 when the
/// match was tied or the call was exactly 0.5, else 0.
pub fn prediction_credit(actual_margin: f64, p_red_win: f64) -> f64 {
    match sign(actual_margin) * sign(p_red_win - 0.5) {
        1 => 1.0,
        0 => 0.5,
        _ => 0.0,
    }
}

/// Coefficients and prediction for one match with that match deleted.
#[derive(Debug, Clone, PartialEq)]
pub struct LooOutcome {
    /// Per-cluster coefficients fitted without match `s`.
    pub beta: Vec<f64>,
    /// Predicted red-minus-blue margin of match `s`.
    pub predicted_margin: f64,
}

/// Two-row OPR downdate for match `s`.
pub fn loo_fit_opr(fit: &ClusteredFit, s: usize) -> Result<LooOutcome> {
    let design = &fit.design;
    if design.kind() != ModelKind::Opr {
        return Err(Error::InvalidArgument("expected an OPR fit".into()));
    }
    let ls = &fit.solution;
    let (b, r) = design.base.match_rows(s);
    let h_bb = ls.hat(b, b);
    let h_rr = ls.hat(r, r);
    let h_rb = ls.hat(r, b);
    let det = (1.0 - h_bb) * (1.0 - h_rr) - h_rb * h_rb;
    if det <= LEVERAGE_TOLERANCE {
        return Err(Error::LeverageSingular(design.base.matches[s].match_no));
    }
    let e_b = ls.residuals[b];
    let e_r = ls.residuals[r];
    let w_b = ((1.0 - h_rr) * e_b + h_rb * e_r) / det;
    let w_r = ((1.0 - h_bb) * e_r + h_rb * e_b) / det;

    let x = &design.columns;
    let x_b = x.row(b).transpose();
    let x_r = x.row(r).transpose();
    let shift = &ls.gram_inverse * (x_b * w_b + x_r * w_r);
    let beta = (&ls.coef - shift).as_slice().to_vec();

    // z·β₋ₛ rather than the hat-matrix shortcut: exact zero when z vanishes
    let predicted_margin = design.margin_rows.row(s).iter().zip(&beta).map(|(z, b)| z * b).sum();
    Ok(LooOutcome { beta, predicted_margin })
}

/// One-row WMPR downdate for match `s` on the constrained design.
pub fn loo_fit_wmpr(fit: &ClusteredFit, s: usize) -> Result<LooOutcome> {
    let design = &fit.design;
    if design.kind() != ModelKind::Wmpr {
        return Err(Error::InvalidArgument("expected a WMPR fit".into()));
    }
    let ls = &fit.solution;
    let h = ls.hat(s, s);
    let one_minus = 1.0 - h;
    if one_minus <= LEVERAGE_TOLERANCE {
        return Err(Error::LeverageSingular(design.base.matches[s].match_no));
    }
    let e = ls.residuals[s];
    let x_s = design.solve_matrix().row(s).transpose();
    let free = &ls.coef - &ls.gram_inverse * &x_s * (e / one_minus);
    let predicted_margin = x_s.dot(&free);
    Ok(LooOutcome {
        beta: coefficients_from_solution(design, free.as_slice()),
        predicted_margin,
    })
}

pub fn loo_fit(fit: &ClusteredFit, s: usize) -> Result<LooOutcome> {
    match fit.design.kind() {
        ModelKind::Opr => loo_fit_opr(fit, s),
        ModelKind::Wmpr => loo_fit_wmpr(fit, s),
    }
}

/// Held-out prediction for one match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooPrediction {
    pub match_no: u32,
    pub margin: f64,
    /// Absent when the match is pivotal.
    pub predicted_margin: Option<f64>,
    pub p_red_win: Option<f64>,
    pub credit: f64,
}

/// Cross-validated prediction rate and MSPE of one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub clusters: usize,
    pub prediction_rate: f64,
    /// Mean over non-pivotal matches; absent when every match is pivotal.
    pub mspe: Option<f64>,
    pub singular_matches: Vec<u32>,
    pub predictions: Vec<LooPrediction>,
}

/// Leave-one-match-out CV of `fit`. Pivotal matches take the 0.5 credit and
/// are left out of the MSPE.
pub fn cross_validate(fit: &ClusteredFit) -> Result<CvOutcome> {
    let design = &fit.design;
    let base = &design.base;
    let m = base.num_matches();
    if m < 2 {
        return Err(Error::InsufficientMatches {
            needed: 2,
            available: m,
        });
    }

    let mut predictions = Vec::with_capacity(m);
    let mut singular = Vec::new();
    let mut squared = Vec::with_capacity(m);
    let mut held_out = Vec::with_capacity(m - 1);
    for s in 0..m {
        let match_no = base.matches[s].match_no;
        let margin = base.margins[s];
        let loo = match loo_fit(fit, s) {
            Ok(loo) => loo,
            Err(Error::LeverageSingular(no)) => {
                log::warn!("match {no} is pivotal for c = {}", design.num_clusters());
                singular.push(no);
                predictions.push(LooPrediction {
                    match_no,
                    margin,
                    predicted_margin: None,
                    p_red_win: None,
                    credit: 0.5,
                });
                continue;
            }
            Err(e) => return Err(e),
        };

        let beta = DVector::from_column_slice(&loo.beta);
        let fitted = &design.margin_rows * beta;
        held_out.clear();
        held_out.extend((0..m).filter(|&t| t != s).map(|t| base.margins[t] - fitted[t]));
        let cdf = EmpiricalCdf::new(&held_out)?;
        let p = win_probability(loo.predicted_margin, &cdf);
        squared.push((margin - loo.predicted_margin).powi(2));
        predictions.push(LooPrediction {
            match_no,
            margin,
            predicted_margin: Some(loo.predicted_margin),
            p_red_win: Some(p),
            credit: prediction_credit(margin, p),
        });
    }

    let prediction_rate = predictions.iter().map(|p| p.credit).sum::<f64>() / m as f64;
    let mspe = (!squared.is_empty()).then(|| squared.iter().sum::<f64>() / squared.len() as f64);
    Ok(CvOutcome {
        clusters: design.num_clusters(),
        prediction_rate,
        mspe,
        singular_matches: singular,
        predictions,
    })
}

fn fit_partition(snapshot: &DivisionSnapshot, kind: ModelKind, partition: &Partition) -> Result<ClusteredFit> {
    let base = Arc::new(crate::design::build_design(
        snapshot,
        kind,
        MatchSelection::Qualification,
    )?);
    fit_clustered(CollapsedDesign::new(base, partition.clone())?)
}

/// Cross-validated prediction rate on the qualification matches.
pub fn cv_prediction_rate(snapshot: &DivisionSnapshot, kind: ModelKind, partition: &Partition) -> Result<f64> {
    Ok(cross_validate(&fit_partition(snapshot, kind, partition)?)?.prediction_rate)
}

/// Cross-validated mean squared margin error on the qualification matches.
pub fn cv_mspe(snapshot: &DivisionSnapshot, kind: ModelKind, partition: &Partition) -> Result<f64> {
    let outcome = cross_validate(&fit_partition(snapshot, kind, partition)?)?;
    match outcome.mspe {
        Some(v) => Ok(v),
        None => Err(Error::LeverageSingular(outcome.singular_matches[0])),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Maximize the cross-validated prediction rate.
    Pr,
    /// Minimize the cross-validated mean squared prediction error.
    Mspe,
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pr" => Ok(Criterion::Pr),
            "mspe" => Ok(Criterion::Mspe),
            other => Err(Error::InvalidArgument(format!("unknown criterion `{other}`"))),
        }
    }
}

/// CV results for one candidate cluster count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub clusters: usize,
    pub partition: Partition,
    pub prediction_rate: Option<f64>,
    pub mspe: Option<f64>,
    pub singular_matches: Vec<u32>,
    /// Why this count could not be evaluated.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    /// Ascending cluster count.
    pub rows: Vec<CvRow>,
    pub chosen_by_pr: Option<usize>,
    pub chosen_by_mspe: Option<usize>,
    /// Held-out predictions at the selected cluster count.
    pub loo_predictions: Vec<LooPrediction>,
}

impl CvReport {
    pub fn row(&self, clusters: usize) -> Option<&CvRow> {
        self.rows.iter().find(|r| r.clusters == clusters)
    }

    pub fn chosen(&self, criterion: Criterion) -> Option<usize> {
        match criterion {
            Criterion::Pr => self.chosen_by_pr,
            Criterion::Mspe => self.chosen_by_mspe,
        }
    }
}

/// Outcome of an estimation procedure.
#[derive(Debug, Clone)]
pub struct Selection {
    pub criterion: Criterion,
    pub clusters: usize,
    pub fit: ClusteredFit,
    pub cv: CvOutcome,
    pub report: CvReport,
}

/// Criterion values closer than this fraction of the largest one count as
/// tied, so rounding noise between exact fits cannot override the preference
/// for fewer clusters.
pub const CRITERION_TIE_TOLERANCE: f64 = 1e-9;

/// Smallest count attaining the best value up to the tie tolerance;
/// `better(a, b)` is true when `a` strictly beats `b`.
fn best_count(
    rows: &[CvRow],
    value: impl Fn(&CvRow) -> Option<f64>,
    better: impl Fn(f64, f64) -> bool,
) -> Option<usize> {
    let scale = rows.iter().filter_map(&value).fold(0.0, |m: f64, v| m.max(v.abs()));
    let tol = CRITERION_TIE_TOLERANCE * scale;
    let mut best: Option<(usize, f64)> = None;
    for row in rows {
        if let Some(v) = value(row) {
            if best.is_none_or(|(_, bv)| better(v, bv) && (v - bv).abs() > tol) {
                best = Some((row.clusters, v));
            }
        }
    }
    best.map(|(c, _)| c)
}

type Evaluated = (Partition, Result<(ClusteredFit, CvOutcome)>);

fn evaluate_level(base: &Arc<DesignSystem>, partition: Partition, fit: Option<Result<ClusteredFit>>) -> Evaluated {
    let fit = fit.unwrap_or_else(|| CollapsedDesign::new(base.clone(), partition.clone()).and_then(fit_clustered));
    let result = fit.and_then(|fit| {
        let cv = cross_validate(&fit)?;
        Ok((fit, cv))
    });
    (partition, result)
}

/// Builds the report from evaluated levels (any order) and picks the fit for
/// `criterion`.
fn assemble(mut levels: Vec<Evaluated>, criterion: Criterion) -> Result<Selection> {
    levels.sort_by_key(|(p, _)| p.num_clusters());
    let rows: Vec<CvRow> = levels
        .iter()
        .map(|(partition, result)| match result {
            Ok((_, cv)) => CvRow {
                clusters: partition.num_clusters(),
                partition: partition.clone(),
                prediction_rate: Some(cv.prediction_rate),
                mspe: cv.mspe,
                singular_matches: cv.singular_matches.clone(),
                error: None,
            },
            Err(e) => CvRow {
                clusters: partition.num_clusters(),
                partition: partition.clone(),
                prediction_rate: None,
                mspe: None,
                singular_matches: vec![],
                error: Some(e.to_string()),
            },
        })
        .collect();

    let chosen_by_pr = best_count(&rows, |r| r.prediction_rate, |a, b| a > b);
    let chosen_by_mspe = best_count(&rows, |r| r.mspe, |a, b| a < b);
    let chosen = match criterion {
        Criterion::Pr => chosen_by_pr,
        Criterion::Mspe => chosen_by_mspe,
    };
    let Some(clusters) = chosen else {
        // Every level failed; surface the error of the finest one.
        let (_, result) = levels.pop().expect("at least one level");
        return Err(result.expect_err("all levels failed"));
    };

    let (_, result) = levels
        .into_iter()
        .find(|(p, _)| p.num_clusters() == clusters)
        .expect("chosen level exists");
    let (fit, cv) = result.expect("chosen level succeeded");
    Ok(Selection {
        criterion,
        clusters,
        report: CvReport {
            rows,
            chosen_by_pr,
            chosen_by_mspe,
            loo_predictions: cv.predictions.clone(),
        },
        fit,
        cv,
    })
}

/// Fits every robot separately (`c = K`) and cross-validates that fit only.
pub fn unclustered(base: Arc<DesignSystem>, criterion: Criterion) -> Result<Selection> {
    let fit = fit_unclustered(base.clone())?;
    let partition = fit.model.partition.clone();
    assemble(vec![evaluate_level(&base, partition, Some(Ok(fit)))], criterion)
}

/// Method 1: cluster the full least-squares strengths once, then evaluate
/// every cut `c = 1..K` of the centroid hierarchy.
pub fn method1(base: Arc<DesignSystem>, criterion: Criterion) -> Result<Selection> {
    let full = fit_unclustered(base.clone())?;
    let hierarchy = centroid_hierarchy(&full.model.strengths)?;
    let k = base.num_robots();

    let mut full = Some(full);
    let jobs: Vec<(Partition, Option<Result<ClusteredFit>>)> = (1..=k)
        .map(|c| {
            let reuse = if c == k { full.take().map(Ok) } else { None };
            (hierarchy.partition(c).clone(), reuse)
        })
        .collect();
    let levels = jobs
        .into_par_iter()
        .map(|(partition, fit)| evaluate_level(&base, partition, fit))
        .collect();
    assemble(levels, criterion)
}

/// Method 2: starting from the full fit, repeatedly merge the two closest
/// clusters of the current refitted strengths and refit, down to one
/// cluster.
pub fn method2(base: Arc<DesignSystem>, criterion: Criterion) -> Result<Selection> {
    let full = fit_unclustered(base.clone())?;
    let mut partition = full.model.partition.clone();
    let mut centroids = full.model.beta.clone();

    let mut jobs: Vec<(Partition, Option<Result<ClusteredFit>>)> = vec![(partition.clone(), Some(Ok(full)))];
    while partition.num_clusters() > 1 {
        let step = single_merge(&centroids, &partition.sizes(), &partition)?;
        partition = step.partition;
        let fit = CollapsedDesign::new(base.clone(), partition.clone()).and_then(fit_clustered);
        // An unidentified level still yields a next level from the merged centroids.
        centroids = match &fit {
            Ok(f) => f.model.beta.clone(),
            Err(_) => step.centroids,
        };
        jobs.push((partition.clone(), Some(fit)));
    }

    let levels = jobs
        .into_par_iter()
        .map(|(partition, fit)| evaluate_level(&base, partition, fit))
        .collect();
    assemble(levels, criterion)
}
