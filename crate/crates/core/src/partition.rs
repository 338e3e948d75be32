use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Assignment of K robots to `c` non-empty clusters.
///
/// Labels are zero-based (`0..c`). A partition built through [`Partition::new`]
/// is canonical: labels are numbered in order of each cluster's smallest
/// member index, so two partitions describing the same grouping compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    labels: Vec<usize>,
    clusters: usize,
}

impl Partition {
    /// Canonicalizes arbitrary labels. Any label values are accepted; they only
    /// need to group robots.
    pub fn new(labels: &[usize]) -> Self {
        let mut remap = std::collections::HashMap::new();
        let labels: Vec<usize> = labels
            .iter()
            .map(|&l| {
                let next = remap.len();
                *remap.entry(l).or_insert(next)
            })
            .collect();
        Partition {
            clusters: remap.len(),
            labels,
        }
    }

    /// Checks labels against a declared cluster count without relabelling.
    pub fn from_labels(labels: Vec<usize>, clusters: usize) -> Result<Self> {
        let mut sizes = vec![0usize; clusters];
        for &label in &labels {
            if label >= clusters {
                return Err(Error::LabelOutOfRange { label, clusters });
            }
            sizes[label] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&n| n == 0) {
            return Err(Error::EmptyCluster(empty));
        }
        Ok(Partition { labels, clusters })
    }

    pub fn singletons(robots: usize) -> Self {
        Partition {
            labels: (0..robots).collect(),
            clusters: robots,
        }
    }

    pub fn single_cluster(robots: usize) -> Self {
        Partition {
            labels: vec![0; robots],
            clusters: usize::from(robots > 0),
        }
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters
    }

    pub fn num_robots(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, robot: usize) -> usize {
        self.labels[robot]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.clusters];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, &l)| l == cluster)
            .map(|(i, _)| i)
    }

    /// Expands per-cluster values to per-robot values.
    pub fn expand(&self, per_cluster: &[f64]) -> Vec<f64> {
        self.labels.iter().map(|&l| per_cluster[l]).collect()
    }

    /// True when every cluster of `self` lies inside one cluster of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        if self.num_robots() != coarser.num_robots() {
            return false;
        }
        let mut image = vec![None; self.clusters];
        self.labels
            .iter()
            .zip(&coarser.labels)
            .all(|(&fine, &coarse)| *image[fine].get_or_insert(coarse) == coarse)
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = Error;

    fn try_from(labels: Vec<usize>) -> Result<Self> {
        let clusters = labels.iter().max().map_or(0, |m| m + 1);
        Partition::from_labels(labels, clusters)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.labels
    }
}
