//! Per-user slot vectors, cosine slot-pair similarity and its aggregation
//! into a slot×slot similarity map.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ingest::{CheckIn, PoiIx};
use crate::temporal::TemporalFactorSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorMode {
    #[default]
    Counts,
    Binary,
}

/// One sparse POI vector per slot of a factor.
pub type SlotVectors = Vec<BTreeMap<PoiIx, f64>>;

pub fn user_slot_vectors<'a>(
    history: impl IntoIterator<Item = &'a CheckIn>,
    factor: &TemporalFactorSpec,
    mode: VectorMode,
) -> SlotVectors {
    let mut vectors: SlotVectors = vec![BTreeMap::new(); factor.slot_count()];
    for c in history {
        let entry = vectors[factor.slot_of(c.timestamp)].entry(c.poi).or_insert(0.0);
        match mode {
            VectorMode::Counts => *entry += 1.0,
            VectorMode::Binary => *entry = 1.0,
        }
    }
    vectors
}

/// Cosine similarity of two sparse non-negative vectors. `None` when either
/// vector is empty: a user without activity in both slots contributes no
/// sample for that pair.
pub fn slot_pair_similarity(a: &BTreeMap<PoiIx, f64>, b: &BTreeMap<PoiIx, f64>) -> Option<f64> {
    let na: f64 = a.values().map(|v| v * v).sum();
    let nb: f64 = b.values().map(|v| v * v).sum();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small
        .iter()
        .filter_map(|(k, v)| large.get(k).map(|w| v * w))
        .sum();
    Some((dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 1.0))
}

/// Accumulated per-user similarity samples for every slot pair of a factor.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilaritySamples {
    pub factor: TemporalFactorSpec,
    n: usize,
    sum: Vec<f64>,
    count: Vec<u32>,
}

impl SimilaritySamples {
    pub fn new(factor: TemporalFactorSpec) -> Self {
        let n = factor.slot_count();
        SimilaritySamples {
            factor,
            n,
            sum: vec![0.0; n * n],
            count: vec![0; n * n],
        }
    }

    pub fn slot_count(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, a: usize, b: usize, value: f64) {
        for (i, j) in [(a, b), (b, a)] {
            self.sum[i * self.n + j] += value;
            self.count[i * self.n + j] += 1;
        }
    }

    /// Adds one sample per slot pair in which the user was active in both slots.
    pub fn add_user(&mut self, vectors: &SlotVectors) {
        let active: Vec<usize> = (0..self.n).filter(|&s| !vectors[s].is_empty()).collect();
        for (i, &a) in active.iter().enumerate() {
            for &b in &active[i + 1..] {
                if let Some(sim) = slot_pair_similarity(&vectors[a], &vectors[b]) {
                    self.add(a, b, sim);
                }
            }
        }
    }

    pub fn count(&self, a: usize, b: usize) -> u32 {
        self.count[a * self.n + b]
    }

    pub fn mean(&self, a: usize, b: usize) -> Option<f64> {
        let c = self.count(a, b);
        (c > 0).then(|| self.sum[a * self.n + b] / c as f64)
    }

    /// Off-diagonal pairs `(a, b)`, `a < b`, with fewer than `m_min` samples.
    pub fn under_sampled(&self, m_min: u32) -> Vec<(usize, usize, u32)> {
        let mut out = Vec::new();
        for a in 0..self.n {
            for b in a + 1..self.n {
                let c = self.count(a, b);
                if c < m_min {
                    out.push((a, b, c));
                }
            }
        }
        out
    }
}

/// Symmetric slot×slot similarity with per-cell observation counts.
/// Unobserved cells hold 0 until completion fills them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotSimilarityMatrix {
    pub factor: TemporalFactorSpec,
    pub n: usize,
    pub sim: Vec<f64>,
    pub count: Vec<u32>,
    pub observed: Vec<bool>,
    pub imputed: Vec<bool>,
}

impl SlotSimilarityMatrix {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.sim[a * self.n + b]
    }

    pub fn is_observed(&self, a: usize, b: usize) -> bool {
        self.observed[a * self.n + b]
    }

    pub fn is_complete(&self) -> bool {
        self.observed
            .iter()
            .zip(&self.imputed)
            .all(|(&o, &i)| o || i)
    }

    /// `factor,slot_a,slot_b,similarity,count,imputed` rows for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("factor,slot_a,slot_b,similarity,count,imputed\n");
        for a in 0..self.n {
            for b in 0..self.n {
                let k = a * self.n + b;
                let value = if self.observed[k] || self.imputed[k] {
                    format!("{}", self.sim[k])
                } else {
                    String::new()
                };
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    self.factor.name, a, b, value, self.count[k], self.imputed[k] as u8
                ));
            }
        }
        out
    }
}

/// Mean similarity per slot pair. Pairs with fewer than `m_min` samples are
/// left unobserved; the diagonal is fixed at 1.
pub fn aggregate_similarity(samples: &SimilaritySamples, m_min: u32) -> SlotSimilarityMatrix {
    let n = samples.slot_count();
    let mut sim = vec![0.0; n * n];
    let mut count = vec![0; n * n];
    let mut observed = vec![false; n * n];
    for a in 0..n {
        for b in 0..n {
            let k = a * n + b;
            if a == b {
                sim[k] = 1.0;
                observed[k] = true;
                continue;
            }
            count[k] = samples.count(a, b);
            if count[k] >= m_min.max(1) {
                sim[k] = samples.mean(a, b).unwrap_or(0.0);
                observed[k] = true;
            }
        }
    }
    SlotSimilarityMatrix {
        factor: samples.factor.clone(),
        n,
        sim,
        count,
        observed,
        imputed: vec![false; n * n],
    }
}
