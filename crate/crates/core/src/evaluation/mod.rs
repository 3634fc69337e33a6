//! Exclusion-protocol evaluation: hide part of each test user's POIs, train
//! on the rest and measure how many hidden POIs come back in top-N lists.

pub mod tune;

use std::collections::{BTreeMap, HashSet};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CheckInLog, PoiIx, UserIx};
use crate::pipeline::{Model, ModelSet, Recommendation};

pub use tune::{parse_grid, phi_sweep, psi_range_sweep, tune_sweep, tuning_population, weights_sweep, TuneResult};

pub const REPORT_FORMAT: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    /// Fraction of each test user's distinct POIs to hide.
    pub x: f64,
    pub test_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            x: 0.3,
            test_fraction: 0.2,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.x > 0.0 && self.x < 1.0) {
            return Err(Error::config("eval.x", "must lie in (0, 1)"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction <= 1.0) {
            return Err(Error::config("eval.test_fraction", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestUser {
    pub user: UserIx,
    /// Sorted.
    pub excluded: Vec<PoiIx>,
    /// Sorted distinct POIs left in the training view.
    pub retained: Vec<PoiIx>,
}

#[derive(Clone, Debug)]
pub struct EvalSplit {
    /// Training view: the full log minus each test user's check-ins at
    /// their excluded POIs.
    pub train: CheckInLog,
    /// Sorted by user.
    pub users: Vec<TestUser>,
    /// Pool members skipped for having fewer than two distinct POIs.
    pub ineligible: Vec<UserIx>,
    pub cfg: SplitConfig,
    pub seed: u64,
}

/// Number of POIs hidden from a user with `distinct` POIs.
pub fn excluded_count(distinct: usize, x: f64) -> usize {
    debug_assert!(distinct >= 2);
    ((x * distinct as f64).round() as usize).clamp(1, distinct - 1)
}

/// Split over all users of the log.
pub fn split_exclude(log: &CheckInLog, cfg: &SplitConfig, seed: u64) -> Result<EvalSplit> {
    let pool: Vec<UserIx> = (0..log.n_users()).collect();
    split_exclude_from(log, &pool, cfg, seed)
}

/// Draws `round(test_fraction · |pool|)` test users among the eligible pool
/// members, then hides `round(x · distinct)` POIs of each.
pub fn split_exclude_from(log: &CheckInLog, pool: &[UserIx], cfg: &SplitConfig, seed: u64) -> Result<EvalSplit> {
    cfg.validate()?;
    let (eligible, ineligible): (Vec<UserIx>, Vec<UserIx>) =
        pool.iter().copied().partition(|&u| log.distinct_pois(u).len() >= 2);
    let k = ((cfg.test_fraction * pool.len() as f64).round() as usize).min(eligible.len());
    if k == 0 {
        return Err(Error::invalid("no eligible test users"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<UserIx> = eligible.choose_multiple(&mut rng, k).copied().collect();
    chosen.sort_unstable();
    let mut users = Vec::with_capacity(k);
    let mut hidden = HashSet::new();
    for u in chosen {
        let distinct = log.distinct_pois(u);
        let m = excluded_count(distinct.len(), cfg.x);
        let mut excluded: Vec<PoiIx> = distinct.choose_multiple(&mut rng, m).copied().collect();
        excluded.sort_unstable();
        let retained = distinct.iter().copied().filter(|p| excluded.binary_search(p).is_err()).collect();
        hidden.extend(excluded.iter().map(|&p| (u, p)));
        users.push(TestUser { user: u, excluded, retained });
    }
    let train = log.restrict(|c| !hidden.contains(&(c.user, c.poi)));
    Ok(EvalSplit {
        train,
        users,
        ineligible,
        cfg: *cfg,
        seed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub hits: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Precision divides by `n` even when the list is shorter.
pub fn metrics_at_n(recommended: &[PoiIx], excluded: &[PoiIx], n: usize) -> Metrics {
    assert!(n > 0 && recommended.len() <= n, "list longer than N");
    assert!(!excluded.is_empty(), "no excluded POIs");
    let target: HashSet<PoiIx> = excluded.iter().copied().collect();
    let mut seen = HashSet::new();
    let hits = recommended.iter().filter(|p| target.contains(p) && seen.insert(**p)).count();
    let precision = hits as f64 / n as f64;
    let recall = hits as f64 / target.len() as f64;
    Metrics {
        hits,
        precision,
        recall,
        f1: f1_score(precision, recall),
    }
}

/// Fraction of users with no hit.
pub fn failure_rate(hits: &[usize]) -> f64 {
    assert!(!hits.is_empty(), "failure rate needs at least one user");
    hits.iter().filter(|&&h| h == 0).count() as f64 / hits.len() as f64
}

/// Identifies the inputs of a run; written into every output.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub config_sha256: String,
    pub seeds: BTreeMap<String, u64>,
    pub data_checksum: String,
    pub slab_checksum: String,
}

impl Fingerprint {
    pub fn line(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!(
            "config={} seeds={} data={} slabs={}",
            self.config_sha256,
            seeds.join(","),
            self.data_checksum,
            self.slab_checksum
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtN {
    pub n: usize,
    pub precision: f64,
    pub recall: f64,
    /// Harmonic mean of the averaged precision and recall.
    pub f1: f64,
    /// Arithmetic mean of the per-user F1 values.
    pub mean_user_f1: f64,
    pub failure_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: Model,
    pub at: Vec<AtN>,
    pub short_lists: usize,
    pub temporal_path_users: usize,
}

impl ModelReport {
    pub fn at(&self, n: usize) -> Option<&AtN> {
        self.at.iter().find(|a| a.n == n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserRow {
    pub user_id: String,
    pub model: Model,
    pub n: usize,
    pub excluded: usize,
    pub metrics: Metrics,
    pub short: bool,
    pub path: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub fingerprint: Fingerprint,
    pub x: f64,
    pub test_fraction: f64,
    pub split_seed: u64,
    pub ns: Vec<usize>,
    pub test_users: usize,
    pub ineligible_users: usize,
    pub models: Vec<ModelReport>,
    #[serde(skip)]
    pub rows: Vec<UserRow>,
}

impl EvalReport {
    pub fn model(&self, m: Model) -> Option<&ModelReport> {
        self.models.iter().find(|r| r.model == m)
    }

    pub fn f1(&self, m: Model, n: usize) -> Option<f64> {
        self.model(m)?.at(n).map(|a| a.f1)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn rows_csv(&self) -> String {
        let mut out = format!("# {}\n", self.fingerprint.line());
        out.push_str("user_id,model,n,excluded,hits,precision,recall,f1,short,path\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.user_id,
                r.model.as_str(),
                r.n,
                r.excluded,
                r.metrics.hits,
                r.metrics.precision,
                r.metrics.recall,
                r.metrics.f1,
                r.short,
                r.path
            ));
        }
        out
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Scores every model on every test user. Each model produces one list at
/// the largest N and smaller N are scored on its prefixes, so lists are
/// nested across N.
pub fn evaluate(set: &ModelSet, split: &EvalSplit, models: &[Model], ns: &[usize], fingerprint: Fingerprint) -> Result<EvalReport> {
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let n_max = *ns.last().ok_or_else(|| Error::invalid("no N values given"))?;
    if ns[0] == 0 {
        return Err(Error::invalid("N must be at least 1"));
    }
    if split.users.is_empty() {
        return Err(Error::invalid("split has no test users"));
    }
    let needs_uni = models.iter().any(|m| matches!(m, Model::Usgt | Model::Ubcft));
    let uni = if needs_uni { Some(set.univariate()?) } else { None };

    let per_user: Vec<Vec<Recommendation>> = split
        .users
        .par_iter()
        .map(|t| {
            models
                .iter()
                .map(|&m| set.recommend_with(m, t.user, n_max, uni.as_ref()))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (mi, &model) in models.iter().enumerate() {
        let mut at = Vec::new();
        for &n in &ns {
            let metrics: Vec<Metrics> = split
                .users
                .iter()
                .zip(&per_user)
                .map(|(t, recs)| {
                    let items = &recs[mi].items;
                    metrics_at_n(&items[..items.len().min(n)], &t.excluded, n)
                })
                .collect();
            let precision = mean(metrics.iter().map(|m| m.precision));
            let recall = mean(metrics.iter().map(|m| m.recall));
            let hits: Vec<usize> = metrics.iter().map(|m| m.hits).collect();
            at.push(AtN {
                n,
                precision,
                recall,
                f1: f1_score(precision, recall),
                mean_user_f1: mean(metrics.iter().map(|m| m.f1)),
                failure_rate: failure_rate(&hits),
            });
        }
        for (t, recs) in split.users.iter().zip(&per_user) {
            let rec = &recs[mi];
            for &n in &ns {
                rows.push(UserRow {
                    user_id: split.train.user_id(t.user).to_string(),
                    model,
                    n,
                    excluded: t.excluded.len(),
                    metrics: metrics_at_n(&rec.items[..rec.items.len().min(n)], &t.excluded, n),
                    short: rec.items.len() < n,
                    path: rec.path.as_str().to_string(),
                });
            }
        }
        reports.push(ModelReport {
            model,
            at,
            short_lists: per_user.iter().filter(|r| r[mi].short).count(),
            temporal_path_users: per_user
                .iter()
                .filter(|r| r[mi].path == crate::hybrid::Path::Temporal)
                .count(),
        });
    }
    Ok(EvalReport {
        format_version: REPORT_FORMAT,
        fingerprint,
        x: split.cfg.x,
        test_fraction: split.cfg.test_fraction,
        split_seed: split.seed,
        ns,
        test_users: split.users.len(),
        ineligible_users: split.ineligible.len(),
        models: reports,
        rows,
    })
}
