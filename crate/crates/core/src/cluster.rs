//! Centroid-linkage agglomerative clustering of one-dimensional strengths.
//!
//! Clusters are always kept in order of their smallest member, which is also
//! the canonical label order of [`Partition`]. The distance between two
//! clusters is the squared difference of their size-weighted centroids; ties
//! go to the lexicographically smallest `(a, b)` label pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Partition;

/// One agglomeration: clusters `a < b` (labels in the partition before the
/// merge) joined at squared centroid distance `distance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterHierarchy {
    /// `K − 1` merges, from `K` clusters down to one.
    pub merges: Vec<Merge>,
    /// `partitions[c − 1]` has `c` clusters.
    partitions: Vec<Partition>,
}

impl ClusterHierarchy {
    pub fn num_robots(&self) -> usize {
        self.partitions.len()
    }

    /// The cut with `clusters` clusters, `1 ≤ clusters ≤ K`.
    pub fn partition(&self, clusters: usize) -> &Partition {
        &self.partitions[clusters - 1]
    }

    pub fn partitions(&self) -> impl Iterator<Item = &Partition> {
        self.partitions.iter()
    }
}

#[derive(Debug, Clone)]
struct Node {
    members: Vec<usize>,
    centroid: f64,
}

fn closest_pair(centroids: impl Fn(usize) -> f64, n: usize) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for a in 0..n {
        for b in a + 1..n {
            let d = (centroids(a) - centroids(b)).powi(2);
            if best.is_none_or(|(_, _, bd)| d < bd) {
                best = Some((a, b, d));
            }
        }
    }
    best
}

fn labels_of(nodes: &[Node], robots: usize) -> Partition {
    let mut labels = vec![0; robots];
    for (label, node) in nodes.iter().enumerate() {
        for &i in &node.members {
            labels[i] = label;
        }
    }
    Partition::from_labels(labels, nodes.len()).expect("every node is non-empty")
}

/// Full centroid-linkage hierarchy over `values` (one per robot).
pub fn centroid_hierarchy(values: &[f64]) -> Result<ClusterHierarchy> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let k = values.len();
    let mut nodes: Vec<Node> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| Node {
            members: vec![i],
            centroid: v,
        })
        .collect();

    let mut partitions = vec![labels_of(&nodes, k)];
    let mut merges = Vec::with_capacity(k.saturating_sub(1));
    while let Some((a, b, distance)) = closest_pair(|i| nodes[i].centroid, nodes.len()) {
        let right = nodes.remove(b);
        let left = &mut nodes[a];
        let (na, nb) = (left.members.len() as f64, right.members.len() as f64);
        left.centroid = (na * left.centroid + nb * right.centroid) / (na + nb);
        left.members.extend(right.members);
        left.members.sort_unstable();
        merges.push(Merge { a, b, distance });
        partitions.push(labels_of(&nodes, k));
    }
    partitions.reverse();

    Ok(ClusterHierarchy { merges, partitions })
}

/// Result of one agglomeration step over existing clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeStep {
    pub merge: Merge,
    /// The coarser partition with one fewer cluster.
    pub partition: Partition,
    /// Size-weighted centroids of the coarser partition's clusters.
    pub centroids: Vec<f64>,
}

/// Merges the closest pair among the clusters of `incoming`, whose centroids
/// and sizes are given per label.
pub fn single_merge(centroids: &[f64], sizes: &[usize], incoming: &Partition) -> Result<MergeStep> {
    let n = incoming.num_clusters();
    if centroids.len() != n {
        return Err(Error::LengthMismatch(centroids.len(), n));
    }
    if sizes.len() != n {
        return Err(Error::LengthMismatch(sizes.len(), n));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two clusters to merge".into()));
    }
    if centroids.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }

    let (a, b, distance) = closest_pair(|i| centroids[i], n).expect("n ≥ 2");
    let (na, nb) = (sizes[a] as f64, sizes[b] as f64);
    let merged = (na * centroids[a] + nb * centroids[b]) / (na + nb);

    // Cluster b's smallest member is larger than a's, so relabelling b as a
    // and shifting later labels down keeps the order canonical.
    let labels: Vec<usize> = incoming
        .labels()
        .iter()
        .map(|&l| match l.cmp(&b) {
            std::cmp::Ordering::Less => l,
            std::cmp::Ordering::Equal => a,
            std::cmp::Ordering::Greater => l - 1,
        })
        .collect();
    let mut next: Vec<f64> = centroids.to_vec();
    next[a] = merged;
    next.remove(b);

    Ok(MergeStep {
        merge: Merge { a, b, distance },
        partition: Partition::from_labels(labels, n - 1)?,
        centroids: next,
    })
}
