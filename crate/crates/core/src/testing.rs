//! Independent reference computations for tests.
//!
//! Nothing here shares code with the estimation path: designs are rebuilt
//! from the match list, OPR is solved through an explicit Gram inverse,
//! constrained WMPR through its Lagrange system, and leave-one-out quantities
//! by deleting the match and solving again.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{validate_snapshot, DivisionSnapshot, MatchRecord, ModelKind, RawMatch, RawSnapshot};
use crate::partition::Partition;

/// A division of `robots` robots and `matches` matches with uniformly random
/// alliances and scores in `0..=100`.
pub fn random_snapshot(seed: u64, robots: usize, matches: usize) -> DivisionSnapshot {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let roster: Vec<String> = (0..robots).map(|i| format!("r{i}")).collect();
    let mut ids: Vec<usize> = (0..robots).collect();
    let qual_matches = (1..=matches)
        .map(|no| {
            ids.shuffle(&mut rng);
            RawMatch {
                match_no: no as u32,
                blue: ids[..3].iter().map(|&i| roster[i].clone()).collect(),
                red: ids[3..6].iter().map(|&i| roster[i].clone()).collect(),
                blue_score: rng.gen_range(0..=100),
                red_score: rng.gen_range(0..=100),
            }
        })
        .collect();
    let raw = RawSnapshot {
        division_key: format!("random-{seed}"),
        frc_ratings: roster
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), -(i as f64)))
            .collect(),
        playoff_roster: roster.iter().take(8.min(robots)).cloned().collect(),
        roster,
        qual_matches,
        playoff_matches: vec![],
    };
    validate_snapshot(&raw).expect("random snapshot is valid")
}

/// Random labels for `clusters` non-empty clusters over `robots` robots.
pub fn random_partition(rng: &mut impl Rng, robots: usize, clusters: usize) -> Partition {
    let mut labels: Vec<usize> = (0..robots)
        .map(|i| if i < clusters { i } else { rng.gen_range(0..clusters) })
        .collect();
    labels.shuffle(rng);
    Partition::new(&labels)
}

/// Bell numbers by the Bell triangle, `K = 1..=n`.
pub fn bell_triangle(n: usize) -> Vec<u128> {
    let mut out = Vec::with_capacity(n);
    let mut row = vec![1u128];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().expect("non-empty row"));
        for &v in &row {
            let last = *next.last().expect("non-empty");
            next.push(last + v);
        }
        out.push(next[0]);
        row = next;
    }
    out
}

/// Counts set partitions of `{0..n}` by enumerating restricted growth
/// strings.
pub fn enumerate_partitions(n: usize) -> usize {
    fn go(pos: usize, n: usize, max: usize) -> usize {
        if pos == n {
            return 1;
        }
        (0..=max + 1).map(|l| go(pos + 1, n, max.max(l))).sum()
    }
    if n == 0 {
        1
    } else {
        go(1, n, 0)
    }
}

fn cluster_indicator(ids: &[usize], partition: &Partition) -> DVector<f64> {
    let mut row = DVector::zeros(partition.num_clusters());
    for &i in ids {
        row[partition.label(i)] += 1.0;
    }
    row
}

/// Collapsed regression rows and responses built straight from the matches.
pub fn oracle_system(kind: ModelKind, matches: &[MatchRecord], partition: &Partition) -> (DMatrix<f64>, DVector<f64>) {
    let c = partition.num_clusters();
    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut ys = Vec::new();
    match kind {
        ModelKind::Opr => {
            for m in matches {
                rows.push(cluster_indicator(&m.blue, partition));
                ys.push(f64::from(m.blue_score));
            }
            for m in matches {
                rows.push(cluster_indicator(&m.red, partition));
                ys.push(f64::from(m.red_score));
            }
        }
        ModelKind::Wmpr => {
            for m in matches {
                rows.push(cluster_indicator(&m.red, partition) - cluster_indicator(&m.blue, partition));
                ys.push(m.margin());
            }
        }
    }
    let mut x = DMatrix::zeros(rows.len(), c);
    for (r, row) in rows.iter().enumerate() {
        x.set_row(r, &row.transpose());
    }
    (x, DVector::from_vec(ys))
}

/// Per-cluster coefficients by the textbook formula for OPR or by the
/// Lagrange system `[XᵀX k; kᵀ 0][β; λ] = [XᵀY; 0]` with cluster sizes `k`
/// for WMPR. `None` when the system is singular.
pub fn oracle_fit(kind: ModelKind, matches: &[MatchRecord], partition: &Partition) -> Option<Vec<f64>> {
    let (x, y) = oracle_system(kind, matches, partition);
    let gram = x.transpose() * &x;
    let rhs = x.transpose() * &y;
    let c = partition.num_clusters();
    match kind {
        ModelKind::Opr => {
            let sv = gram.clone().svd(false, false).singular_values;
            if sv.min() < 1e-9 * sv.max() {
                return None;
            }
            let inv = gram.try_inverse()?;
            Some((inv * rhs).as_slice().to_vec())
        }
        ModelKind::Wmpr => {
            let sizes: Vec<f64> = partition.sizes().iter().map(|&n| n as f64).collect();
            let mut kkt = DMatrix::zeros(c + 1, c + 1);
            kkt.view_mut((0, 0), (c, c)).copy_from(&gram);
            for j in 0..c {
                kkt[(j, c)] = sizes[j];
                kkt[(c, j)] = sizes[j];
            }
            let mut b = DVector::zeros(c + 1);
            b.rows_mut(0, c).copy_from(&rhs);
            let svd = kkt.clone().svd(false, false);
            let sv = svd.singular_values;
            if sv.min() < 1e-9 * sv.max() {
                return None;
            }
            let sol = kkt.lu().solve(&b)?;
            Some(sol.rows(0, c).as_slice().to_vec())
        }
    }
}

fn margin_of(m: &MatchRecord, partition: &Partition, beta: &[f64]) -> f64 {
    let z = cluster_indicator(&m.red, partition) - cluster_indicator(&m.blue, partition);
    z.iter().zip(beta).map(|(a, b)| a * b).sum()
}

/// Coefficients and predicted margin for match `s` by deleting it and
/// refitting; `None` when the reduced system is singular.
pub fn delete_one_refit(
    kind: ModelKind,
    matches: &[MatchRecord],
    partition: &Partition,
    s: usize,
) -> Option<(Vec<f64>, f64)> {
    let rest: Vec<MatchRecord> = matches
        .iter()
        .enumerate()
        .filter(|(t, _)| *t != s)
        .map(|(_, m)| m.clone())
        .collect();
    let beta = oracle_fit(kind, &rest, partition)?;
    let predicted = margin_of(&matches[s], partition, &beta);
    Some((beta, predicted))
}

/// Brute-force cross-validated prediction rate and MSPE.
pub fn brute_force_cv(kind: ModelKind, matches: &[MatchRecord], partition: &Partition) -> (f64, Option<f64>) {
    let m = matches.len();
    let mut credit = 0.0;
    let mut squared = Vec::new();
    for s in 0..m {
        let Some((beta, predicted)) = delete_one_refit(kind, matches, partition, s) else {
            credit += 0.5;
            continue;
        };
        let others: Vec<f64> = (0..m)
            .filter(|&t| t != s)
            .map(|t| matches[t].margin() - margin_of(&matches[t], partition, &beta))
            .collect();
        let below = others.iter().filter(|&&e| e <= -predicted).count() as f64;
        let p = 1.0 - below / others.len() as f64;
        let actual = matches[s].margin();
        let product = actual.signum_or_zero() * (p - 0.5).signum_or_zero();
        credit += if product > 0.0 {
            1.0
        } else if product == 0.0 {
            0.5
        } else {
            0.0
        };
        squared.push((actual - predicted).powi(2));
    }
    let mspe = (!squared.is_empty()).then(|| squared.iter().sum::<f64>() / squared.len() as f64);
    (credit / m as f64, mspe)
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
