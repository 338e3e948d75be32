//! Schedule arithmetic and the linear designs behind every model.
//!
//! Both models share the form `Y = X·β + ε`:
//!
//! * OPR stacks one row per alliance: blue rows `0..M` then red rows
//!   `M..2M`, each with three ones, responding to that alliance's score.
//! * WMPR has one row per match holding red indicators minus blue
//!   indicators, responding to the red-minus-blue margin. Its columns always
//!   sum to zero, so strengths are identified only up to a constant and are
//!   fixed by a sum-zero constraint.
//!
//! Clustering collapses robot columns into cluster columns; the WMPR variant
//! additionally eliminates one cluster through the size-weighted sum-zero
//! constraint so that the remaining columns have full rank.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};

use crate::domain::{DivisionSnapshot, MatchRecord, ModelKind, ALLIANCE_SIZE};
use crate::error::{Error, Result};
use crate::partition::Partition;

/// Robots on the field in one match.
pub const ROBOTS_PER_MATCH: usize = 2 * ALLIANCE_SIZE;

/// Matches needed so that each of `robots` robots plays at least `plays`
/// times: `ceil(plays * robots / 6)`.
pub fn match_count(robots: usize, plays: usize) -> Result<usize> {
    if robots < ROBOTS_PER_MATCH {
        return Err(Error::InvalidArgument(format!(
            "a division needs at least {ROBOTS_PER_MATCH} robots, got {robots}"
        )));
    }
    if plays == 0 {
        return Err(Error::InvalidArgument("plays per robot must be at least 1".into()));
    }
    Ok((plays * robots).div_ceil(ROBOTS_PER_MATCH))
}

/// Number of ways to partition `robots` robots into any number of non-empty
/// clusters (the Bell number), summed from Stirling numbers of the second
/// kind `S(K, c) = (1/c!) Σ_j (-1)^j C(c, j) (c - j)^K`.
pub fn partition_count(robots: usize) -> BigUint {
    let k = u32::try_from(robots).expect("robot count fits in u32");
    let mut total = BigInt::zero();
    let mut factorial = BigInt::one();
    for c in 1..=robots {
        factorial *= c;
        let mut inner = BigInt::zero();
        let mut binomial = BigInt::one();
        for j in 0..=c {
            let term = &binomial * BigInt::from(c - j).pow(k);
            if j % 2 == 0 {
                inner += term;
            } else {
                inner -= term;
            }
            binomial = binomial * (c - j) / (j + 1);
        }
        debug_assert!((&inner % &factorial).is_zero());
        total += inner / &factorial;
    }
    debug_assert!(!total.is_negative());
    total.to_biguint().expect("partition count is non-negative")
}

/// Which matches of a snapshot enter a design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchSelection {
    Qualification,
    /// The first `n` qualification matches by match number.
    QualificationPrefix(usize),
    Playoff,
}

impl MatchSelection {
    pub fn select<'a>(&self, snapshot: &'a DivisionSnapshot) -> &'a [MatchRecord] {
        match *self {
            MatchSelection::Qualification => &snapshot.qual_matches,
            MatchSelection::QualificationPrefix(n) => &snapshot.qual_matches[..n.min(snapshot.qual_matches.len())],
            MatchSelection::Playoff => &snapshot.playoff_matches,
        }
    }
}

/// Response vector and covariate matrix for one model kind over a set of
/// matches, together with the per-match margin form used for prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSystem {
    pub kind: ModelKind,
    pub matches: Vec<MatchRecord>,
    /// `Y`: `2M` alliance scores (OPR) or `M` margins (WMPR).
    pub response: DVector<f64>,
    /// `X`: `M* × K`.
    pub covariates: DMatrix<f64>,
    /// Red score minus blue score, one entry per match.
    pub margins: DVector<f64>,
    /// Red indicators minus blue indicators, `M × K`.
    pub margin_rows: DMatrix<f64>,
}

impl DesignSystem {
    pub fn num_matches(&self) -> usize {
        self.matches.len()
    }

    /// `M*`: `2M` for OPR, `M` for WMPR.
    pub fn num_rows(&self) -> usize {
        self.response.len()
    }

    pub fn num_robots(&self) -> usize {
        self.covariates.ncols()
    }

    /// Design rows that belong to match `s`: `(s, M + s)` for OPR (blue, red)
    /// and `(s, s)` for WMPR.
    pub fn match_rows(&self, s: usize) -> (usize, usize) {
        match self.kind {
            ModelKind::Opr => (s, self.num_matches() + s),
            ModelKind::Wmpr => (s, s),
        }
    }

    /// Keeps the matches for which `keep(s)` is true.
    pub fn filter_matches(&self, mut keep: impl FnMut(usize) -> bool) -> Result<DesignSystem> {
        let matches: Vec<MatchRecord> = self
            .matches
            .iter()
            .enumerate()
            .filter(|(s, _)| keep(*s))
            .map(|(_, m)| m.clone())
            .collect();
        design_from_matches(self.kind, self.num_robots(), &matches)
    }
}

/// Builds `Y` and `X` for the selected matches.
pub fn build_design(snapshot: &DivisionSnapshot, kind: ModelKind, selection: MatchSelection) -> Result<DesignSystem> {
    design_from_matches(kind, snapshot.num_robots(), selection.select(snapshot))
}

pub fn design_from_matches(kind: ModelKind, robots: usize, matches: &[MatchRecord]) -> Result<DesignSystem> {
    if matches.is_empty() {
        return Err(Error::EmptySelection);
    }
    let m = matches.len();
    let mut blue = DMatrix::zeros(m, robots);
    let mut red = DMatrix::zeros(m, robots);
    for (s, record) in matches.iter().enumerate() {
        for &i in &record.blue {
            blue[(s, i)] = 1.0;
        }
        for &i in &record.red {
            red[(s, i)] = 1.0;
        }
    }
    let margins = DVector::from_iterator(m, matches.iter().map(MatchRecord::margin));
    let margin_rows = &red - &blue;

    let (response, covariates) = match kind {
        ModelKind::Opr => {
            let scores = matches
                .iter()
                .map(|r| f64::from(r.blue_score))
                .chain(matches.iter().map(|r| f64::from(r.red_score)));
            let mut x = DMatrix::zeros(2 * m, robots);
            x.rows_mut(0, m).copy_from(&blue);
            x.rows_mut(m, m).copy_from(&red);
            (DVector::from_iterator(2 * m, scores), x)
        }
        ModelKind::Wmpr => (margins.clone(), margin_rows.clone()),
    };

    Ok(DesignSystem {
        kind,
        matches: matches.to_vec(),
        response,
        covariates,
        margins,
        margin_rows,
    })
}

/// The WMPR design with one cluster eliminated through
/// `Σ_j K_j β_j = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedDesign {
    /// `M × (c − 1)`; column `t` belongs to cluster `free[t]`.
    pub columns: DMatrix<f64>,
    /// Cluster whose coefficient is recovered from the constraint: the one
    /// holding the highest-index robot.
    pub reference: usize,
    pub free: Vec<usize>,
}

impl ConstrainedDesign {
    /// Recovers the full per-cluster coefficient vector from the free
    /// coefficients.
    pub fn expand(&self, free_coef: &[f64], sizes: &[usize]) -> Vec<f64> {
        let mut beta = vec![0.0; sizes.len()];
        let mut weighted = 0.0;
        for (&cluster, &b) in self.free.iter().zip(free_coef) {
            beta[cluster] = b;
            weighted += sizes[cluster] as f64 * b;
        }
        if !sizes.is_empty() {
            beta[self.reference] = -weighted / sizes[self.reference] as f64;
        }
        beta
    }
}

/// A design whose robot columns are summed within clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapsedDesign {
    pub base: Arc<DesignSystem>,
    pub partition: Partition,
    /// `X^(c)`: `M* × c`.
    pub columns: DMatrix<f64>,
    /// Margin rows collapsed to clusters, `M × c`.
    pub margin_rows: DMatrix<f64>,
    /// Present for WMPR.
    pub constrained: Option<ConstrainedDesign>,
    pub cluster_sizes: Vec<usize>,
}

impl CollapsedDesign {
    pub fn new(base: Arc<DesignSystem>, partition: Partition) -> Result<Self> {
        if partition.num_robots() != base.num_robots() {
            return Err(Error::LengthMismatch(partition.num_robots(), base.num_robots()));
        }
        let c = partition.num_clusters();
        let columns = collapse_columns(&base.covariates, &partition);
        let margin_rows = collapse_columns(&base.margin_rows, &partition);
        let cluster_sizes = partition.sizes();

        let constrained = match base.kind {
            ModelKind::Opr => None,
            ModelKind::Wmpr => {
                let reference = partition.label(base.num_robots() - 1);
                let free: Vec<usize> = (0..c).filter(|&j| j != reference).collect();
                let mut bar = DMatrix::zeros(base.num_rows(), free.len());
                for (t, &j) in free.iter().enumerate() {
                    let ratio = cluster_sizes[j] as f64 / cluster_sizes[reference] as f64;
                    let col = columns.column(j) - columns.column(reference) * ratio;
                    bar.set_column(t, &col);
                }
                Some(ConstrainedDesign {
                    columns: bar,
                    reference,
                    free,
                })
            }
        };

        Ok(CollapsedDesign {
            base,
            partition,
            columns,
            margin_rows,
            constrained,
            cluster_sizes,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.base.kind
    }

    pub fn num_clusters(&self) -> usize {
        self.partition.num_clusters()
    }

    /// The matrix the least-squares problem is solved against: `X^(c)` for
    /// OPR, the constrained `X̄^(c)` for WMPR.
    pub fn solve_matrix(&self) -> &DMatrix<f64> {
        match &self.constrained {
            Some(con) => &con.columns,
            None => &self.columns,
        }
    }
}

/// Collapses `base` under labels in `0..clusters`.
pub fn collapse_design(base: Arc<DesignSystem>, labels: &[usize], clusters: usize) -> Result<CollapsedDesign> {
    let partition = Partition::from_labels(labels.to_vec(), clusters)?;
    CollapsedDesign::new(base, partition)
}

fn collapse_columns(x: &DMatrix<f64>, partition: &Partition) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), partition.num_clusters());
    for (robot, &label) in partition.labels().iter().enumerate() {
        let mut col = out.column_mut(label);
        col += x.column(robot);
    }
    out
}
