//! Bottom-up complete-linkage clustering of slots.
//!
//! Distances are `1 - sim`. The complete-linkage distance of two clusters is
//! their largest pairwise distance, i.e. one minus their smallest pairwise
//! similarity, so the merge test is carried out on similarities directly:
//! clusters merge while the best linkage similarity is at least `threshold`.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub linkage_distance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    /// Partition of `0..n`, each cluster sorted, clusters ordered by first slot.
    pub clusters: Vec<Vec<usize>>,
    pub merges: Vec<Merge>,
}

/// `sim` is a dense symmetric `n×n` similarity matrix.
pub fn complete_linkage(sim: &[f64], n: usize, threshold: f64) -> Clustering {
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut merges = Vec::new();
    let linkage = |a: &[usize], b: &[usize]| {
        a.iter()
            .flat_map(|&i| b.iter().map(move |&j| sim[i * n + j]))
            .fold(f64::INFINITY, f64::min)
    };
    loop {
        // Clusters stay sorted by their first slot, so scanning (i, j) in
        // order and keeping only strict improvements resolves ties towards
        // the lexicographically smallest pair.
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let s = linkage(&clusters[i], &clusters[j]);
                if best.is_none_or(|(_, _, bs)| s > bs) {
                    best = Some((i, j, s));
                }
            }
        }
        let Some((i, j, s)) = best else { break };
        if s < threshold {
            break;
        }
        let right = clusters.remove(j);
        let left = clusters[i].clone();
        clusters[i].extend_from_slice(&right);
        clusters[i].sort_unstable();
        merges.push(Merge {
            left,
            right,
            linkage_distance: 1.0 - s,
        });
    }
    clusters.sort_by_key(|c| c[0]);
    Clustering { clusters, merges }
}
