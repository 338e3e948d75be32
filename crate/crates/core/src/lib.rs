//! Robot strength estimation for 3-vs-3 alliance competitions.
//!
//! Strengths come from least-squares fits of alliance scores (OPR) or
//! winning margins (WMPR), optionally with robots grouped into latent
//! clusters of equal strength (OPRC / WMPRC). The number of clusters is
//! chosen by leave-one-match-out cross-validation of either the win/loss
//! prediction rate or the squared margin error.
//!
//! Procedures are looked up by name in a [`ProcedureRegistry`]:
//!
//! ```
//! use frc_core::{ProcedureRegistry, Criterion, synthetic};
//!
//! let (strengths, _) = synthetic::clustered_strengths(12, &[40.0, 10.0], 7);
//! let division = synthetic::generate(&synthetic::SyntheticConfig {
//!     strengths, plays: 8, noise_sd: 0.0, playoff_matches: 0, seed: 7,
//! }).unwrap();
//! let registry = ProcedureRegistry::builtin();
//! let selection = registry
//!     .run("wmprc1", &division.snapshot, Criterion::Pr)
//!     .unwrap();
//! assert_eq!(selection.clusters, 2);
//! ```

pub mod cluster;
pub mod design;
pub mod domain;
pub mod error;
pub mod estimate;
pub mod evaluate;
pub mod linalg;
pub mod partition;
pub mod procedure;
pub mod select;
pub mod stability;
pub mod synthetic;
#[cfg(feature = "testing")]
pub mod testing;

pub use cluster::{centroid_hierarchy, single_merge, ClusterHierarchy, Merge, MergeStep};
pub use design::{
    build_design, collapse_design, match_count, partition_count, CollapsedDesign, DesignSystem, MatchSelection,
};
pub use domain::{validate_snapshot, DivisionSnapshot, MatchRecord, ModelKind, RawMatch, RawSnapshot, RobotId, Stage};
pub use error::{Error, Result};
pub use estimate::{
    average_score, fit_clustered, fit_opr_clustered, fit_unclustered, fit_wmpr_clustered, ClusteredFit, FittedModel,
};
pub use evaluate::{
    agreement, model_top_ranking, playoff_metrics, precision_recall, rank_correlation, AgreementReport, PlayoffMetrics,
};
pub use partition::Partition;
pub use procedure::{Procedure, ProcedureRegistry};
pub use select::{
    cross_validate, cv_mspe, cv_prediction_rate, empirical_cdf, loo_fit, loo_fit_opr, loo_fit_wmpr, method1, method2,
    predict_win_prob, win_probability, Criterion, CvOutcome, CvReport, CvRow, EmpiricalCdf, LooOutcome, LooPrediction,
    Selection,
};
pub use stability::{stability_suite, StabilityReport, StabilityRow, TopSetRule};
