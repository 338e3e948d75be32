//! JSON reports written by the commands. Every report carries
//! `schema_version`, the snapshot's `division_key` and a hash of the
//! snapshot content, so a report can be matched to the data it came from.

use std::path::Path;
use std::sync::Arc;

use frc_core::{
    build_design, fit_clustered, AgreementReport, CollapsedDesign, Criterion, CvRow, DivisionSnapshot, FittedModel,
    LooPrediction, MatchSelection, ModelKind, Partition, PlayoffMetrics, Selection, StabilityReport,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// SHA-256 of the snapshot's compact key-based JSON; independent of file
/// formatting and fetch time.
pub fn snapshot_hash(snapshot: &DivisionSnapshot) -> String {
    let bytes = serde_json::to_vec(&snapshot.to_raw()).expect("snapshot serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// 1-based official rank: one more than the number of robots rated higher.
pub fn frc_rank(snapshot: &DivisionSnapshot, robot: usize) -> usize {
    let r = snapshot.frc_ratings[robot];
    1 + snapshot.frc_ratings.iter().filter(|&&o| o > r).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotStrength {
    pub robot: String,
    pub beta: f64,
    pub cluster: usize,
    pub frc_rank: usize,
}

/// Robots in model order (strength descending, official rating breaking ties).
pub fn ranked_strengths(snapshot: &DivisionSnapshot, model: &FittedModel) -> Vec<RobotStrength> {
    frc_core::model_top_ranking(model, &snapshot.frc_ratings)
        .into_iter()
        .map(|i| RobotStrength {
            robot: snapshot.key(i).to_string(),
            beta: model.strengths[i],
            cluster: model.partition.label(i),
            frc_rank: frc_rank(snapshot, i),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub prediction_rate: f64,
    pub mspe: Option<f64>,
    pub singular_matches: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub division_key: String,
    pub snapshot_hash: String,
    pub model: String,
    pub model_kind: ModelKind,
    pub criterion: Criterion,
    pub chosen_c: usize,
    /// Cluster label per robot, in roster order.
    pub partition: Partition,
    /// One coefficient per cluster.
    pub cluster_beta: Vec<f64>,
    pub sigma2: Option<f64>,
    pub strengths: Vec<RobotStrength>,
    pub cv: CvSummary,
    pub cv_table: Vec<CvRow>,
    pub chosen_by_pr: Option<usize>,
    pub chosen_by_mspe: Option<usize>,
    pub loo_predictions: Vec<LooPrediction>,
}

impl FitReport {
    pub fn new(snapshot: &DivisionSnapshot, model: &str, selection: &Selection) -> Self {
        let fit = &selection.fit.model;
        FitReport {
            schema_version: REPORT_SCHEMA_VERSION,
            division_key: snapshot.division_key.clone(),
            snapshot_hash: snapshot_hash(snapshot),
            model: model.to_string(),
            model_kind: fit.kind,
            criterion: selection.criterion,
            chosen_c: selection.clusters,
            partition: fit.partition.clone(),
            cluster_beta: fit.beta.clone(),
            sigma2: fit.sigma2,
            strengths: ranked_strengths(snapshot, fit),
            cv: CvSummary {
                prediction_rate: selection.cv.prediction_rate,
                mspe: selection.cv.mspe,
                singular_matches: selection.cv.singular_matches.clone(),
            },
            cv_table: selection.report.rows.clone(),
            chosen_by_pr: selection.report.chosen_by_pr,
            chosen_by_mspe: selection.report.chosen_by_mspe,
            loo_predictions: selection.report.loo_predictions.clone(),
        }
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let report: FitReport = read_json(path)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(CliError::Report(format!(
                "{}: schema_version {} (expected {REPORT_SCHEMA_VERSION})",
                path.display(),
                report.schema_version
            )));
        }
        Ok(report)
    }

    /// Checks that this report was produced from `snapshot` and refits the
    /// recorded partition, which reproduces the model exactly.
    pub fn restore(&self, snapshot: &DivisionSnapshot) -> Result<FittedModel, CliError> {
        if self.division_key != snapshot.division_key || self.snapshot_hash != snapshot_hash(snapshot) {
            return Err(CliError::RosterMismatch(format!(
                "fit report is for `{}` ({}), snapshot is `{}` ({})",
                self.division_key,
                short(&self.snapshot_hash),
                snapshot.division_key,
                short(&snapshot_hash(snapshot))
            )));
        }
        if self.partition.num_robots() != snapshot.num_robots() {
            return Err(CliError::RosterMismatch(format!(
                "fit report covers {} robots, snapshot has {}",
                self.partition.num_robots(),
                snapshot.num_robots()
            )));
        }
        let design = build_design(snapshot, self.model_kind, MatchSelection::Qualification)?;
        let fit = fit_clustered(CollapsedDesign::new(Arc::new(design), self.partition.clone())?)?.model;
        let agrees = fit
            .beta
            .iter()
            .zip(&self.cluster_beta)
            .all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        if fit.beta.len() != self.cluster_beta.len() || !agrees {
            return Err(CliError::Report(
                "fit report coefficients do not reproduce from the snapshot".into(),
            ));
        }
        Ok(fit)
    }
}

fn short(hash: &str) -> &str {
    &hash[..hash.len().min(12)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub division_key: String,
    pub snapshot_hash: String,
    pub model: String,
    pub chosen_c: usize,
    /// Leave-one-match-out prediction rate on qualification matches.
    pub qualification_prediction_rate: f64,
    pub qualification_mspe: Option<f64>,
    pub agreement: AgreementReport,
    /// Absent when the snapshot has no playoff matches.
    pub playoff: Option<PlayoffMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityFile {
    pub schema_version: u32,
    pub division_key: String,
    pub snapshot_hash: String,
    #[serde(flatten)]
    pub report: StabilityReport,
}

/// Top-N cutoffs reported by `evaluate`.
pub const TOP_N: [usize; 2] = [8, 16];

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
    bytes.push(b'\n');
    bytes
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Report(format!("{}: {e}", path.display())))
}
