//! Parameter inference for the chained slab tables.
//!
//! Each observed (user, POI) pair owns a chained conditional table over
//! multi-aspect slabs. The E-step computes the posterior over slabs by
//! log-sum-exp; the M-step blends it with the pair's empirical slab
//! histogram, `(n(z) + γ·resp(z)) / (n + γ)`, and re-derives the chain.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CheckInLog, PoiIx, UserIx};
use crate::mati::layout::{chain_distribution, chain_log_prob, tables_from_distribution, ChainLayout, ChainTables};
use crate::slabs::SlabIndex;

pub const MATI_FORMAT: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmConfig {
    pub max_iter: usize,
    /// Relative log-likelihood change below which EM stops.
    pub tol: f64,
    /// Pseudo-count weight of the posterior in the evidence blend.
    pub gamma: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iter: 200,
            tol: 1e-6,
            gamma: 1.0,
        }
    }
}

/// A (user, POI) pair with at least one check-in and its slab histogram.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedPair {
    pub user: UserIx,
    pub poi: PoiIx,
    /// Dense check-in counts per slab.
    pub counts: Vec<u32>,
    pub total: u32,
}

/// Observed pairs sorted by (user, POI).
pub fn observed_pairs(log: &CheckInLog, index: &SlabIndex) -> Vec<ObservedPair> {
    let mut map: HashMap<(UserIx, PoiIx), Vec<u32>> = HashMap::new();
    for c in log.checkins() {
        map.entry((c.user, c.poi)).or_insert_with(|| vec![0; index.n_slabs()])[index.slab_of(c.timestamp)] += 1;
    }
    let mut pairs: Vec<ObservedPair> = map
        .into_iter()
        .map(|((user, poi), counts)| ObservedPair {
            user,
            poi,
            total: counts.iter().sum(),
            counts,
        })
        .collect();
    pairs.sort_by_key(|p| (p.user, p.poi));
    pairs
}

/// `ln Pr(u) + ln Pr_ν(l|u) + Σ_k ln Pr(z_k | z_{k+1..}, u, l)` with
/// `Pr(u) = 1`. Any zero factor yields `-inf`.
pub fn joint_prob(layout: &ChainLayout, pr_nu: f64, tables: &[f64], z: usize) -> f64 {
    pr_nu.ln() + chain_log_prob(layout, tables, z)
}

/// Posterior over slabs for one pair.
pub fn posterior(layout: &ChainLayout, pr_nu: f64, tables: &[f64]) -> Result<Vec<f64>> {
    let logs: Vec<f64> = (0..layout.n_slabs()).map(|z| joint_prob(layout, pr_nu, tables, z)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return Err(Error::invalid("pair has no support"));
    }
    let weights: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

pub fn e_step(layout: &ChainLayout, pr_nu: &[f64], tables: &[ChainTables]) -> Result<Vec<Vec<f64>>> {
    pr_nu
        .par_iter()
        .zip(tables.par_iter())
        .map(|(&nu, t)| posterior(layout, nu, t))
        .collect()
}

/// Blends responsibilities with the evidence histograms (when given) and
/// re-derives the chained tables. Returns the tables and the number of
/// conditioning tuples that fell back to a uniform row.
pub fn m_step(
    layout: &ChainLayout,
    resp: &[Vec<f64>],
    evidence: Option<&[ObservedPair]>,
    gamma: f64,
) -> (Vec<ChainTables>, usize) {
    let out: Vec<(ChainTables, usize)> = resp
        .par_iter()
        .enumerate()
        .map(|(i, r)| match evidence {
            Some(ev) => {
                let p = &ev[i];
                let n = p.total as f64;
                let blended: Vec<f64> = r
                    .iter()
                    .zip(&p.counts)
                    .map(|(&rz, &c)| (c as f64 + gamma * rz) / (n + gamma))
                    .collect();
                tables_from_distribution(layout, &blended)
            }
            None => tables_from_distribution(layout, r),
        })
        .collect();
    let fallbacks = out.iter().map(|(_, f)| f).sum();
    (out.into_iter().map(|(t, _)| t).collect(), fallbacks)
}

/// `Σ_pairs Σ_z n(u,l,z) · ln Pr(u, l, z)`.
pub fn log_likelihood(layout: &ChainLayout, pairs: &[ObservedPair], pr_nu: &[f64], tables: &[ChainTables]) -> f64 {
    pairs
        .iter()
        .zip(pr_nu)
        .zip(tables)
        .map(|((p, &nu), t)| {
            p.counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(z, &c)| c as f64 * joint_prob(layout, nu, t, z))
                .sum::<f64>()
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmReport {
    /// Log-likelihood at initialization followed by one value per iteration.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Uniform-row fallbacks in the final M-step.
    pub fallbacks: usize,
}

/// Where `Pr_ν(l|u)` for observed pairs comes from.
#[derive(Clone, Debug)]
pub enum PrNu {
    /// Visit count divided by the user's largest visit count.
    VisitFrequency,
    Given(HashMap<(UserIx, PoiIx), f64>),
}

#[derive(Clone, Debug)]
pub enum EmInit {
    /// Every pair starts from the global share of check-ins per slab.
    GlobalPopularity,
    /// Chained tables per pair; pairs not listed start from global popularity.
    Tables(HashMap<(UserIx, PoiIx), ChainTables>),
}

/// Trained parameter set ψ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatiParams {
    pub format_version: u32,
    /// Checksum of the slab index the tables refer to.
    pub slab_checksum: String,
    pub layout: ChainLayout,
    pub pairs: Vec<(UserIx, PoiIx)>,
    pub pr_nu: Vec<f64>,
    pub tables: Vec<ChainTables>,
    /// Per POI, the mean slab distribution of its observed pairs.
    pub poi_backoff: Vec<Option<Vec<f64>>>,
    /// Share of all training check-ins per slab.
    pub global: Vec<f64>,
}

impl MatiParams {
    pub fn pair_index(&self, u: UserIx, l: PoiIx) -> Option<usize> {
        self.pairs.binary_search(&(u, l)).ok()
    }

    /// `Pr(z | u, l)` for every slab: trained tables for observed pairs,
    /// the POI backoff otherwise, and global popularity as a last resort.
    pub fn slab_distribution(&self, u: UserIx, l: PoiIx) -> Vec<f64> {
        if let Some(i) = self.pair_index(u, l) {
            return chain_distribution(&self.layout, &self.tables[i]);
        }
        self.poi_distribution(l)
    }

    pub fn poi_distribution(&self, l: PoiIx) -> Vec<f64> {
        match self.poi_backoff.get(l) {
            Some(Some(d)) => d.clone(),
            _ => self.global.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("parameters serialize")
    }

    /// Parses parameters and refuses them unless they were trained against
    /// `index`.
    pub fn from_json(text: &str, index: &SlabIndex) -> Result<Self> {
        let p: MatiParams = serde_json::from_str(text)?;
        if p.format_version != MATI_FORMAT {
            return Err(Error::invalid(format!("unsupported parameter format {}", p.format_version)));
        }
        if p.slab_checksum != index.checksum {
            return Err(Error::Stale(
                "parameters were trained against a different slab index".into(),
            ));
        }
        Ok(p)
    }
}

pub fn global_popularity(log: &CheckInLog, index: &SlabIndex) -> Vec<f64> {
    let mut g = vec![0.0; index.n_slabs()];
    for c in log.checkins() {
        g[index.slab_of(c.timestamp)] += 1.0;
    }
    let total: f64 = g.iter().sum();
    if total > 0.0 {
        for v in &mut g {
            *v /= total;
        }
    } else {
        let n = g.len() as f64;
        g.iter_mut().for_each(|v| *v = 1.0 / n);
    }
    g
}

fn visit_frequency(pairs: &[ObservedPair]) -> Vec<f64> {
    let mut max_per_user: HashMap<UserIx, u32> = HashMap::new();
    for p in pairs {
        let m = max_per_user.entry(p.user).or_default();
        *m = (*m).max(p.total);
    }
    pairs.iter().map(|p| p.total as f64 / max_per_user[&p.user] as f64).collect()
}

pub fn run_em(
    log: &CheckInLog,
    index: &SlabIndex,
    pr_nu: &PrNu,
    init: &EmInit,
    cfg: &EmConfig,
) -> Result<(MatiParams, EmReport)> {
    if !(cfg.gamma > 0.0) || !(cfg.tol > 0.0) {
        return Err(Error::config("mati", "gamma and tol must be positive"));
    }
    let layout = ChainLayout::from_index(index);
    let pairs = observed_pairs(log, index);
    let global = global_popularity(log, index);
    let nu: Vec<f64> = match pr_nu {
        PrNu::VisitFrequency => visit_frequency(&pairs),
        PrNu::Given(map) => pairs
            .iter()
            .map(|p| map.get(&(p.user, p.poi)).copied().unwrap_or(0.0))
            .collect(),
    };
    let (global_tables, _) = tables_from_distribution(&layout, &global);
    let mut tables: Vec<ChainTables> = pairs
        .iter()
        .map(|p| match init {
            EmInit::Tables(map) => map.get(&(p.user, p.poi)).cloned().unwrap_or_else(|| global_tables.clone()),
            EmInit::GlobalPopularity => global_tables.clone(),
        })
        .collect();
    if tables.iter().any(|t| t.len() != layout.table_len()) {
        return Err(Error::invalid("initial tables do not match the slab layout"));
    }

    let mut lls = vec![log_likelihood(&layout, &pairs, &nu, &tables)];
    let mut converged = false;
    let mut fallbacks = 0;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let resp = e_step(&layout, &nu, &tables)?;
        let (next, fb) = m_step(&layout, &resp, Some(&pairs), cfg.gamma);
        tables = next;
        fallbacks = fb;
        iterations += 1;
        let prev = *lls.last().expect("initial value");
        let cur = log_likelihood(&layout, &pairs, &nu, &tables);
        lls.push(cur);
        if cur < prev - 1e-9 * prev.abs().max(1.0) {
            return Err(Error::Invariant(format!(
                "log-likelihood decreased at iteration {iterations}: {prev} -> {cur}"
            )));
        }
        if prev.is_finite() && (cur - prev).abs() <= cfg.tol * prev.abs() {
            converged = true;
            break;
        }
    }

    let mut backoff_sum: Vec<Option<(Vec<f64>, usize)>> = vec![None; log.n_pois()];
    for (p, t) in pairs.iter().zip(&tables) {
        let d = chain_distribution(&layout, t);
        let slot = backoff_sum[p.poi].get_or_insert_with(|| (vec![0.0; d.len()], 0));
        for (a, b) in slot.0.iter_mut().zip(&d) {
            *a += b;
        }
        slot.1 += 1;
    }
    let poi_backoff = backoff_sum
        .into_iter()
        .map(|s| s.map(|(sum, n)| sum.into_iter().map(|v| v / n as f64).collect()))
        .collect();

    let params = MatiParams {
        format_version: MATI_FORMAT,
        slab_checksum: index.checksum.clone(),
        layout,
        pairs: pairs.iter().map(|p| (p.user, p.poi)).collect(),
        pr_nu: nu,
        tables,
        poi_backoff,
        global,
    };
    let report = EmReport {
        log_likelihood: lls,
        iterations,
        converged,
        fallbacks,
    };
    Ok((params, report))
}
