//! Quota-based re-ranking of USG candidates into weekday, weekend and
//! neutral buckets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::PoiIx;
use crate::univariate::UnivariateConfig;

const EPS: f64 = 1e-9;

/// Integer bucket sizes `[weekday, weekend, neutral]` summing to `n`.
/// Raw quotas are clamped at zero and rescaled to `n` when they do not sum
/// to it, then rounded by largest remainder; remainder ties go to the
/// larger of `avg_d`/`avg_e` first and to the neutral bucket last.
pub fn m_avg_quotas(avg_d: f64, avg_e: f64, lambda: f64, xi: f64, n: usize) -> [usize; 3] {
    let nf = n as f64;
    let mut raw = [
        ((avg_d + lambda - xi / 2.0) * nf).max(0.0),
        ((avg_e + lambda - xi / 2.0) * nf).max(0.0),
        (xi * nf).max(0.0),
    ];
    let sum: f64 = raw.iter().sum();
    if sum <= 0.0 {
        raw = [0.0, 0.0, nf];
    } else if (sum - nf).abs() > EPS {
        for r in &mut raw {
            *r *= nf / sum;
        }
    }
    let mut q = [0usize; 3];
    for k in 0..3 {
        q[k] = (raw[k] + EPS).floor() as usize;
    }
    let assigned: usize = q.iter().sum();
    let preference = if avg_d >= avg_e { [0, 1, 2] } else { [1, 0, 2] };
    let mut order: Vec<usize> = preference.to_vec();
    // Stable sort keeps the preference order among equal remainders.
    order.sort_by(|&a, &b| {
        let ra = raw[a] - q[a] as f64;
        let rb = raw[b] - q[b] as f64;
        if (ra - rb).abs() <= EPS {
            std::cmp::Ordering::Equal
        } else {
            rb.total_cmp(&ra)
        }
    });
    for &k in order.iter().cycle().take(n.saturating_sub(assigned)) {
        q[k] += 1;
    }
    if assigned > n {
        // Floors can only exceed n through the EPS nudge; trim from the end.
        let mut extra = assigned - n;
        for &k in order.iter().rev() {
            let take = extra.min(q[k]);
            q[k] -= take;
            extra -= take;
        }
    }
    q
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MAvgOutput {
    pub items: Vec<PoiIx>,
    pub quotas: [usize; 3],
    /// Fewer than `n` candidates were available.
    pub short: bool,
}

/// Re-ranks `rho` (candidates in descending score order) into a list of
/// `n`. `acts[i]` is the POI act of `rho[i]`; `None` counts as neutral.
/// Each bucket takes its best members in `rho` order, shortfalls are filled
/// from the remaining candidates in `rho` order and the result keeps `rho`
/// order.
pub fn m_avg_recommend(
    rho: &[PoiIx],
    acts: &[Option<f64>],
    avg_d: f64,
    avg_e: f64,
    cfg: &UnivariateConfig,
    n: usize,
) -> Result<MAvgOutput> {
    if rho.len() != acts.len() {
        return Err(Error::invalid("candidate and act lists differ in length"));
    }
    if n == 0 {
        return Err(Error::invalid("N must be at least 1"));
    }
    let quotas = m_avg_quotas(avg_d, avg_e, cfg.lambda, cfg.xi, n);
    let bucket = |a: Option<f64>| match a {
        Some(a) if a > cfg.theta => 0,
        Some(a) if a < cfg.theta => 1,
        _ => 2,
    };
    let mut taken = vec![false; rho.len()];
    let mut filled = [0usize; 3];
    for (i, &a) in acts.iter().enumerate() {
        let b = bucket(a);
        if filled[b] < quotas[b] {
            filled[b] += 1;
            taken[i] = true;
        }
    }
    let mut remaining = n.min(rho.len()) - taken.iter().filter(|&&t| t).count();
    for t in taken.iter_mut() {
        if remaining == 0 {
            break;
        }
        if !*t {
            *t = true;
            remaining -= 1;
        }
    }
    let items = rho
        .iter()
        .zip(&taken)
        .filter(|(_, &t)| t)
        .map(|(&p, _)| p)
        .collect();
    Ok(MAvgOutput {
        items,
        quotas,
        short: rho.len() < n,
    })
}
