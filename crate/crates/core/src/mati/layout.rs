//! Chain-rule layout of the conditional slab tables.
//!
//! Factors are ordered finest first. A multi-aspect slab id is mixed-radix
//! with the finest factor most significant, so `z mod S_k` (where `S_k` is
//! the product of slab counts of factors `k..t`) is the id of the suffix
//! tuple `(z_k, …, z_t)`. Level `k` stores `Pr(z_k | z_{k+1..t}, u, l)` at
//! offset `z mod S_k`; the coarsest level is `Pr(z_t | u, l)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slabs::SlabIndex;
use crate::temporal::TemporalFactorSpec;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainLayout {
    pub names: Vec<String>,
    pub counts: Vec<usize>,
    /// `suffix[k]` = product of `counts[k..]`; `suffix[t]` = 1.
    suffix: Vec<usize>,
    offsets: Vec<usize>,
}

impl ChainLayout {
    pub fn new(names: Vec<String>, counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() || names.len() != counts.len() {
            return Err(Error::invalid("chain layout needs one slab count per factor"));
        }
        if counts.contains(&0) {
            return Err(Error::invalid("every factor needs at least one slab"));
        }
        let t = counts.len();
        let mut suffix = vec![1; t + 1];
        for k in (0..t).rev() {
            suffix[k] = suffix[k + 1] * counts[k];
        }
        let mut offsets = vec![0; t + 1];
        for k in 0..t {
            offsets[k + 1] = offsets[k] + suffix[k];
        }
        Ok(ChainLayout {
            names,
            counts,
            suffix,
            offsets,
        })
    }

    pub fn from_index(index: &SlabIndex) -> Self {
        let names = index.factors.iter().map(|f| f.name.clone()).collect();
        ChainLayout::new(names, index.slab_counts()).expect("slab index has valid counts")
    }

    pub fn n_levels(&self) -> usize {
        self.counts.len()
    }

    pub fn n_slabs(&self) -> usize {
        self.suffix[0]
    }

    /// Length of one pair's flattened tables.
    pub fn table_len(&self) -> usize {
        self.offsets[self.n_levels()]
    }

    pub fn level_len(&self, k: usize) -> usize {
        self.suffix[k]
    }

    pub fn level_range(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    /// Flat index of `Pr(z_k | z_{k+1..t})` for the full slab id `z`.
    pub fn entry(&self, k: usize, z: usize) -> usize {
        self.offsets[k] + z % self.suffix[k]
    }

    /// Conditioning suffix id of level `k` for a level entry `s` (`s < S_k`).
    pub fn parent(&self, k: usize, s: usize) -> usize {
        s % self.suffix[k + 1]
    }

    /// Human-readable form, e.g. `Pr(hour|day,u,l) · Pr(day|u,l)`.
    pub fn describe(&self) -> String {
        (0..self.n_levels())
            .map(|k| {
                let given: Vec<&str> = self.names[k + 1..].iter().map(String::as_str).collect();
                if given.is_empty() {
                    format!("Pr({}|u,l)", self.names[k])
                } else {
                    format!("Pr({}|{},u,l)", self.names[k], given.join(","))
                }
            })
            .collect::<Vec<_>>()
            .join(" · ")
    }
}

/// Layout for factors in TSP order with the given slab counts (matched by
/// position after sorting by rank). Duplicate ranks are rejected.
pub fn chain_factorization(factors: &[(TemporalFactorSpec, usize)]) -> Result<ChainLayout> {
    let mut f = factors.to_vec();
    f.sort_by_key(|(s, _)| s.tsp_rank);
    if f.windows(2).any(|w| w[0].0.tsp_rank == w[1].0.tsp_rank) {
        return Err(Error::invalid("duplicate tsp ranks"));
    }
    ChainLayout::new(
        f.iter().map(|(s, _)| s.name.clone()).collect(),
        f.iter().map(|&(_, c)| c).collect(),
    )
}

/// One observed pair's chained conditional tables, flattened per layout.
pub type ChainTables = Vec<f64>;

/// `Pr(z | u, l)` from the chained tables.
pub fn chain_prob(layout: &ChainLayout, tables: &[f64], z: usize) -> f64 {
    (0..layout.n_levels()).map(|k| tables[layout.entry(k, z)]).product()
}

/// `ln Pr(z | u, l)`; a zero factor gives `-inf`.
pub fn chain_log_prob(layout: &ChainLayout, tables: &[f64], z: usize) -> f64 {
    (0..layout.n_levels()).map(|k| tables[layout.entry(k, z)].ln()).sum()
}

/// The full joint `Pr(z | u, l)` over all slabs.
pub fn chain_distribution(layout: &ChainLayout, tables: &[f64]) -> Vec<f64> {
    (0..layout.n_slabs()).map(|z| chain_prob(layout, tables, z)).collect()
}

/// Chained conditionals reproducing the joint distribution `dist` over
/// slabs. Conditioning tuples with zero mass get a uniform row; the number
/// of such rows is returned alongside.
pub fn tables_from_distribution(layout: &ChainLayout, dist: &[f64]) -> (ChainTables, usize) {
    let t = layout.n_levels();
    // marg[k][s]: mass of suffix tuple s over levels k..t.
    let mut marg: Vec<Vec<f64>> = Vec::with_capacity(t + 1);
    marg.push(dist.to_vec());
    for k in 1..=t {
        let mut m = vec![0.0; layout.suffix[k]];
        for (s, &v) in marg[k - 1].iter().enumerate() {
            m[s % layout.suffix[k]] += v;
        }
        marg.push(m);
    }
    let mut tables = vec![0.0; layout.table_len()];
    let mut fallbacks = 0;
    for k in 0..t {
        let uniform = 1.0 / layout.counts[k] as f64;
        let mut degenerate = vec![false; layout.suffix[k + 1]];
        for s in 0..layout.suffix[k] {
            let p = layout.parent(k, s);
            let denom = marg[k + 1][p];
            tables[layout.offsets[k] + s] = if denom > 0.0 {
                marg[k][s] / denom
            } else {
                degenerate[p] = true;
                uniform
            };
        }
        fallbacks += degenerate.iter().filter(|&&d| d).count();
    }
    (tables, fallbacks)
}

/// Largest deviation from 1 of any conditional row sum.
pub fn max_row_error(layout: &ChainLayout, tables: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..layout.n_levels() {
        let mut sums = vec![0.0; layout.suffix[k + 1]];
        for s in 0..layout.suffix[k] {
            sums[layout.parent(k, s)] += tables[layout.offsets[k] + s];
        }
        for v in sums {
            worst = worst.max((v - 1.0).abs());
        }
    }
    worst
}
