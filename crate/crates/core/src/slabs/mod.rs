//! Temporal slab extraction: slot-similarity maps per factor, low-rank
//! completion of their gaps, complete-linkage clustering into uni-aspect
//! slabs and the cross product into multi-aspect slabs.

pub mod completion;
pub mod hac;
pub mod index;
pub mod similarity;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::CheckInLog;
use crate::sampling::{collect_until, CollectConfig, CoverageReport};
use crate::temporal::{order_by_tsp, TemporalFactorSpec};

pub use completion::{complete_matrix, complete_symmetric, CompletionConfig};
pub use hac::{complete_linkage, Clustering};
pub use index::{cross_slabs, entity_slab_profile, Entity, SlabIndex, SlabProfile, SlabProfiles};
pub use similarity::{aggregate_similarity, slot_pair_similarity, user_slot_vectors, SlotSimilarityMatrix, VectorMode};

/// Clusters a completed similarity map into uni-aspect slabs.
pub fn hac_complete_linkage(m: &SlotSimilarityMatrix, threshold: f64) -> Vec<Vec<usize>> {
    complete_linkage(&m.sim, m.n, threshold).clusters
}

#[derive(Clone, Debug)]
pub struct ExtractConfig {
    pub collect: CollectConfig,
    pub completion: CompletionConfig,
    /// Per-factor HAC similarity threshold, matched by factor name; factors
    /// without an entry use `default_threshold`.
    pub thresholds: Vec<(String, f64)>,
    pub default_threshold: f64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            collect: CollectConfig::default(),
            completion: CompletionConfig::default(),
            thresholds: Vec::new(),
            default_threshold: 0.6,
        }
    }
}

impl ExtractConfig {
    pub fn threshold_for(&self, factor: &str) -> f64 {
        self.thresholds
            .iter()
            .find(|(name, _)| name == factor)
            .map(|&(_, t)| t)
            .unwrap_or(self.default_threshold)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtractionSummary {
    pub rounds: usize,
    pub users_sampled: usize,
    pub under_sampled_pairs: usize,
    pub imputed_cells: usize,
}

/// Runs the full extraction on a (training) dataset view.
pub fn extract_slabs(
    log: &CheckInLog,
    factors: Vec<TemporalFactorSpec>,
    cfg: &ExtractConfig,
    seed: u64,
) -> Result<(SlabIndex, CoverageReport, ExtractionSummary)> {
    let factors = order_by_tsp(factors)?;
    let (samples, coverage) = collect_until(log, &factors, &cfg.collect, seed);
    let mut per_factor = Vec::with_capacity(factors.len());
    let mut matrices = Vec::with_capacity(factors.len());
    let mut imputed_cells = 0;
    for s in &samples {
        let raw = aggregate_similarity(s, cfg.collect.m_min);
        let completed = complete_matrix(&raw, &cfg.completion)?;
        imputed_cells += completed.imputed.iter().filter(|&&i| i).count();
        let slabs = hac_complete_linkage(&completed, cfg.threshold_for(&s.factor.name));
        per_factor.push((s.factor.clone(), slabs));
        matrices.push(completed);
    }
    let index = cross_slabs(per_factor, matrices)?;
    let summary = ExtractionSummary {
        rounds: coverage.rounds,
        users_sampled: coverage.users_sampled,
        under_sampled_pairs: coverage.under_sampled.len(),
        imputed_cells,
    };
    Ok((index, coverage, summary))
}
