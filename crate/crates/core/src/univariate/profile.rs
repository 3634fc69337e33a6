//! Effective user act: per-POI weekday/weekend probabilities shifted by λ
//! and weighted by the scaled leave-one-out USG visit score.

use serde::{Deserialize, Serialize};

use crate::baselines::{UsgModel, UsgWeights};
use crate::error::{Error, Result};
use crate::ingest::{CheckInLog, PoiIx, UserIx};
use crate::univariate::{probs_of, user_poi_counts, UnivariateConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Weekday,
    Weekend,
    Neutral,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoiContribution {
    pub poi: PoiIx,
    pub p_d: f64,
    pub p_e: f64,
    pub p_hat_d: f64,
    pub p_hat_e: f64,
    pub c_star: f64,
    pub c_hat: f64,
    pub pr_d: f64,
    pub pr_e: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserActProfile {
    pub user: UserIx,
    pub pois: Vec<PoiContribution>,
    /// Raw act `Avg^d − Avg^e` with every POI weighted equally.
    pub raw_act: f64,
    pub avg_d: f64,
    pub avg_e: f64,
    pub effective_act: f64,
    pub orientation: Orientation,
    /// All `c*` were equal, so feature scaling fell back to `ĉ* = 1`.
    pub degenerate_scaling: bool,
}

/// Where the per-POI visit score `c*` comes from.
#[derive(Clone, Copy, Debug)]
pub enum CStarSource<'a> {
    /// Leave-one-out USG score of the POI.
    Usg(&'a UsgModel, UsgWeights),
    /// Every POI weighted the same.
    Uniform,
}

/// Builds the profile from `(poi, p^d, p^e, c*)` rows.
pub fn effective_user_act_from(user: UserIx, rows: &[(PoiIx, f64, f64, f64)], lambda: f64) -> Result<UserActProfile> {
    if rows.is_empty() {
        return Err(Error::invalid("user has no visited POIs"));
    }
    let min = rows.iter().map(|r| r.3).fold(f64::INFINITY, f64::min);
    let max = rows.iter().map(|r| r.3).fold(f64::NEG_INFINITY, f64::max);
    let degenerate = max - min <= 0.0;
    let pois: Vec<PoiContribution> = rows
        .iter()
        .map(|&(poi, p_d, p_e, c_star)| {
            let c_hat = if degenerate { 1.0 } else { (c_star - min) / (max - min) };
            let (p_hat_d, p_hat_e) = (p_d - lambda, p_e - lambda);
            PoiContribution {
                poi,
                p_d,
                p_e,
                p_hat_d,
                p_hat_e,
                c_star,
                c_hat,
                pr_d: c_hat * p_hat_d,
                pr_e: c_hat * p_hat_e,
            }
        })
        .collect();
    let n = pois.len() as f64;
    let avg_d = pois.iter().map(|p| p.pr_d).sum::<f64>() / n;
    let avg_e = pois.iter().map(|p| p.pr_e).sum::<f64>() / n;
    let raw_act = pois.iter().map(|p| p.p_d - p.p_e).sum::<f64>() / n;
    let orientation = match avg_d.partial_cmp(&avg_e) {
        Some(std::cmp::Ordering::Greater) => Orientation::Weekday,
        Some(std::cmp::Ordering::Less) => Orientation::Weekend,
        _ => Orientation::Neutral,
    };
    Ok(UserActProfile {
        user,
        pois,
        raw_act,
        avg_d,
        avg_e,
        effective_act: (avg_d - avg_e).abs(),
        orientation,
        degenerate_scaling: degenerate,
    })
}

/// Effective act of `u` on the given log. With a USG source, each visited
/// POI's `c*` is its USG score after removing it from the history.
/// Needs at least two distinct POIs.
pub fn effective_user_act(
    log: &CheckInLog,
    u: UserIx,
    cfg: &UnivariateConfig,
    source: CStarSource<'_>,
) -> Result<UserActProfile> {
    let counts = user_poi_counts(log, u, cfg.utc_offset_secs);
    if counts.len() < 2 {
        return Err(Error::invalid("effective user act needs at least two distinct POIs"));
    }
    let history: Vec<PoiIx> = counts.keys().copied().collect();
    let rows: Vec<(PoiIx, f64, f64, f64)> = counts
        .iter()
        .enumerate()
        .map(|(i, (&poi, &(d, e)))| {
            let (pd, pe) = probs_of(d, e);
            let c = match source {
                CStarSource::Usg(model, w) => {
                    let mut rest = history.clone();
                    rest.remove(i);
                    model.scores(u, &rest, &w)[poi]
                }
                CStarSource::Uniform => 1.0,
            };
            (poi, pd, pe, c)
        })
        .collect();
    effective_user_act_from(u, &rows, cfg.lambda)
}
