//! Brute-force oracles and generators shared by the integration suites.

#![allow(dead_code)]

use std::collections::BTreeSet;

use mati::baselines::UserPoiMatrix;
use mati::ingest::{CheckInLog, PoiIx, RawCheckIn, SocialEdges, UserIx};
use rand::Rng;

/// Monday 2010-04-05 00:00 UTC.
pub const MONDAY: i64 = 1_270_425_600;

/// A random two-level (or one-level) EM instance.
#[derive(Clone, Debug)]
pub struct EmInstance {
    /// Slab counts per factor, finest first.
    pub counts: Vec<usize>,
    pub pr_nu: Vec<f64>,
    /// Flat chained tables in the library layout.
    pub tables: Vec<Vec<f64>>,
    pub resp: Vec<Vec<f64>>,
    /// Per-pair check-in counts per slab.
    pub evidence: Vec<Vec<u32>>,
    pub gamma: f64,
}

pub fn n_slabs(counts: &[usize]) -> usize {
    counts.iter().product()
}

/// Per-factor slab ids of the multi-aspect id `z`; the first factor is the
/// most significant digit.
pub fn decode(counts: &[usize], mut z: usize) -> Vec<usize> {
    let mut out = vec![0; counts.len()];
    for k in (0..counts.len()).rev() {
        out[k] = z % counts[k];
        z /= counts[k];
    }
    out
}

/// Flat offset of `Pr(z_k | z_{k+1..})` for the tuple `digits`.
pub fn flat_entry(counts: &[usize], k: usize, digits: &[usize]) -> usize {
    let mut offset = 0;
    for j in 0..k {
        offset += counts[j..].iter().product::<usize>();
    }
    let mut suffix = 0;
    for j in k..counts.len() {
        suffix = suffix * counts[j] + digits[j];
    }
    offset + suffix
}

pub fn table_len(counts: &[usize]) -> usize {
    (0..counts.len()).map(|k| counts[k..].iter().product::<usize>()).sum()
}

fn random_simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    random_simplex_in(rng, n, 0.05, 1.0)
}

fn random_simplex_in(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Random chained tables: every conditioning row is a strictly positive
/// distribution.
pub fn random_tables(rng: &mut impl Rng, counts: &[usize]) -> Vec<f64> {
    random_tables_in(rng, counts, 0.05, 1.0)
}

/// As [`random_tables`], with unnormalized row weights drawn from `lo..hi`.
pub fn random_tables_in(rng: &mut impl Rng, counts: &[usize], lo: f64, hi: f64) -> Vec<f64> {
    let mut t = vec![0.0; table_len(counts)];
    for k in 0..counts.len() {
        let parents: usize = counts[k + 1..].iter().product();
        for parent in 0..parents {
            let row = random_simplex_in(rng, counts[k], lo, hi);
            for (zk, &v) in row.iter().enumerate() {
                let mut digits = vec![0; counts.len()];
                let mut rest = parent;
                for j in (k + 1..counts.len()).rev() {
                    digits[j] = rest % counts[j];
                    rest /= counts[j];
                }
                digits[k] = zk;
                t[flat_entry(counts, k, &digits)] = v;
            }
        }
    }
    t
}

pub fn random_em_instance(rng: &mut impl Rng) -> EmInstance {
    let levels = rng.random_range(1..=2);
    let counts: Vec<usize> = (0..levels).map(|_| rng.random_range(1..=3)).collect();
    let users = rng.random_range(1..=5);
    let pois = rng.random_range(1..=6);
    let mut pairs = BTreeSet::new();
    for _ in 0..rng.random_range(1..=users * pois) {
        pairs.insert((rng.random_range(0..users), rng.random_range(0..pois)));
    }
    let z = n_slabs(&counts);
    let n = pairs.len();
    EmInstance {
        pr_nu: (0..n).map(|_| rng.random_range(0.01..=1.0)).collect(),
        tables: (0..n).map(|_| random_tables(rng, &counts)).collect(),
        resp: (0..n).map(|_| random_simplex(rng, z)).collect(),
        evidence: (0..n)
            .map(|_| {
                let mut c: Vec<u32> = (0..z).map(|_| rng.random_range(0..4)).collect();
                if c.iter().all(|&v| v == 0) {
                    c[rng.random_range(0..z)] = 1;
                }
                c
            })
            .collect(),
        gamma: rng.random_range(0.1..5.0),
        counts,
    }
}

/// `ln(Pr_ν · Π_k Pr(z_k | z_{k+1..}))` by direct product.
pub fn brute_joint_log(counts: &[usize], nu: f64, tables: &[f64], z: usize) -> f64 {
    let digits = decode(counts, z);
    let mut p = nu;
    for k in 0..counts.len() {
        p *= tables[flat_entry(counts, k, &digits)];
    }
    p.ln()
}

pub fn brute_posterior(counts: &[usize], nu: f64, tables: &[f64]) -> Vec<f64> {
    let joint: Vec<f64> = (0..n_slabs(counts))
        .map(|z| brute_joint_log(counts, nu, tables, z).exp())
        .collect();
    let s: f64 = joint.iter().sum();
    joint.into_iter().map(|v| v / s).collect()
}

/// Chained conditionals of a joint distribution by explicit marginal sums;
/// zero-mass rows become uniform.
pub fn brute_conditionals(counts: &[usize], joint: &[f64]) -> Vec<f64> {
    let mut t = vec![0.0; table_len(counts)];
    let zs = n_slabs(counts);
    for k in 0..counts.len() {
        for z in 0..zs {
            let d = decode(counts, z);
            let suffix_mass = |from: usize| -> f64 {
                (0..zs)
                    .filter(|&y| decode(counts, y)[from..] == d[from..])
                    .map(|y| joint[y])
                    .sum()
            };
            let num = suffix_mass(k);
            let den = suffix_mass(k + 1);
            t[flat_entry(counts, k, &d)] = if den > 0.0 { num / den } else { 1.0 / counts[k] as f64 };
        }
    }
    t
}

pub fn brute_m_step(counts: &[usize], resp: &[f64], evidence: &[u32], gamma: f64) -> Vec<f64> {
    let n: f64 = evidence.iter().map(|&c| c as f64).sum();
    let blended: Vec<f64> = resp
        .iter()
        .zip(evidence)
        .map(|(&r, &c)| (c as f64 + gamma * r) / (n + gamma))
        .collect();
    brute_conditionals(counts, &blended)
}

/// Cosine top-k neighbourhood vote, counted from scratch over every user.
pub fn brute_ubcf(matrix: &UserPoiMatrix, u: UserIx, l: PoiIx, k: usize) -> f64 {
    let mine: BTreeSet<PoiIx> = matrix.pois_of(u).into_iter().collect();
    let mut sims: Vec<(UserIx, f64)> = (0..matrix.n_users())
        .filter(|&v| v != u)
        .filter_map(|v| {
            let theirs: BTreeSet<PoiIx> = matrix.pois_of(v).into_iter().collect();
            let overlap = mine.intersection(&theirs).count();
            (overlap > 0).then(|| (v, overlap as f64 / ((mine.len() * theirs.len()) as f64).sqrt()))
        })
        .collect();
    sims.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    sims.truncate(k);
    let total: f64 = sims.iter().map(|s| s.1).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let hit: f64 = sims.iter().filter(|(v, _)| matrix.visited(*v, l)).map(|s| s.1).sum();
    (hit / total).min(1.0)
}

/// `(hits, precision, recall)` by set counting.
pub fn brute_metrics(recommended: &[PoiIx], excluded: &[PoiIx], n: usize) -> (usize, f64, f64) {
    let r: BTreeSet<PoiIx> = recommended.iter().copied().collect();
    let e: BTreeSet<PoiIx> = excluded.iter().copied().collect();
    let hits = r.intersection(&e).count();
    (hits, hits as f64 / n as f64, hits as f64 / e.len() as f64)
}

pub fn checkin(u: &str, p: &str, ts: i64, lat: f64, lon: f64) -> RawCheckIn {
    RawCheckIn {
        user_id: u.into(),
        poi_id: p.into(),
        timestamp: ts,
        lat,
        lon,
    }
}

/// Random small log: every user has at least one check-in.
pub fn random_log(rng: &mut impl Rng, users: usize, pois: usize, per_user: usize) -> CheckInLog {
    let coords: Vec<(f64, f64)> = (0..pois)
        .map(|_| (rng.random_range(40.0..40.2), rng.random_range(-74.2..-74.0)))
        .collect();
    let mut recs = Vec::new();
    for u in 0..users {
        for _ in 0..rng.random_range(1..=per_user) {
            let p = rng.random_range(0..pois);
            let ts = MONDAY + rng.random_range(0..4 * 7 * 86_400);
            recs.push(checkin(&format!("u{u:03}"), &format!("p{p:03}"), ts, coords[p].0, coords[p].1));
        }
    }
    CheckInLog::new(recs, SocialEdges::default())
}
