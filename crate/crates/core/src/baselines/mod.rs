//! Non-temporal scorers: user-based CF, social influence and geographical
//! influence, and their USG mixture.
//!
//! The social weighting and geo fitting are a reconstruction: binary matrix
//! cosine with top-k neighbours, friend Jaccard over tagged friend and
//! location sets, and a power law over all same-user POI pair distances.

pub mod cf;
pub mod geo;
pub mod matrix;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CheckInLog, PoiIx, UserIx};

pub use cf::{social_score, social_scores, ubcf_neighbors, ubcf_score, ubcf_scores, SocialGraph};
pub use geo::{fit_geo_model, fit_power_law, geo_score, haversine_km, GeoConfig, PowerLaw};
pub use matrix::UserPoiMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UsgWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl UsgWeights {
    pub const FOURSQUARE: UsgWeights = UsgWeights { alpha: 0.2, beta: 0.6 };
    pub const BRIGHTKITE: UsgWeights = UsgWeights { alpha: 0.3, beta: 0.4 };
    pub const UBCF_ONLY: UsgWeights = UsgWeights { alpha: 0.0, beta: 0.0 };

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let w = UsgWeights { alpha, beta };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) || !(0.0..1.0).contains(&self.beta) {
            return Err(Error::config("usg", "alpha and beta must lie in [0, 1)"));
        }
        if self.alpha + self.beta >= 1.0 {
            return Err(Error::config("usg", "alpha + beta must be below 1"));
        }
        Ok(())
    }

    pub fn mix(&self, ubcf: f64, social: f64, geo: f64) -> f64 {
        (1.0 - self.alpha - self.beta) * ubcf + self.alpha * social + self.beta * geo
    }
}

impl Default for UsgWeights {
    fn default() -> Self {
        UsgWeights::FOURSQUARE
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub k_neighbors: usize,
    pub geo: GeoConfig,
    pub weights: UsgWeights,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            k_neighbors: 50,
            geo: GeoConfig::default(),
            weights: UsgWeights::default(),
        }
    }
}

/// Per-user max-normalized component scores; entries outside the candidate
/// set are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Components {
    pub ubcf: Vec<f64>,
    pub social: Vec<f64>,
    pub geo: Vec<f64>,
}

impl Components {
    pub fn mix(&self, w: &UsgWeights) -> Vec<f64> {
        (0..self.ubcf.len())
            .map(|l| w.mix(self.ubcf[l], self.social[l], self.geo[l]))
            .collect()
    }
}

/// Divides candidate scores by their maximum; all-zero stays zero.
pub fn max_normalize(scores: &mut [f64], is_candidate: &[bool]) {
    let max = scores
        .iter()
        .zip(is_candidate)
        .filter(|(_, &c)| c)
        .map(|(&s, _)| s)
        .fold(0.0, f64::max);
    for (s, &c) in scores.iter_mut().zip(is_candidate) {
        *s = if c && max > 0.0 { *s / max } else { 0.0 };
    }
}

/// Mask of POIs not in the (sorted) history.
pub fn candidate_mask(n_pois: usize, history: &[PoiIx]) -> Vec<bool> {
    let mut mask = vec![true; n_pois];
    for &p in history {
        mask[p] = false;
    }
    mask
}

/// Trained USG state: the user×POI matrix, friend lists, POI coordinates
/// and the fitted power law.
#[derive(Clone, Debug)]
pub struct UsgModel {
    pub matrix: UserPoiMatrix,
    pub graph: SocialGraph,
    pub coords: Vec<(f64, f64)>,
    /// `None` when the geo law could not be fitted; the geo component is
    /// then neutral.
    pub geo: Option<PowerLaw>,
    pub config: BaselineConfig,
}

impl UsgModel {
    /// Fails when the config gives the geo component weight but the data
    /// has fewer than two distance bins.
    pub fn fit(log: &CheckInLog, config: BaselineConfig) -> Result<Self> {
        config.weights.validate()?;
        let matrix = UserPoiMatrix::from_log(log);
        let coords: Vec<(f64, f64)> = (0..log.n_pois()).map(|p| log.poi_coord(p)).collect();
        let geo = match fit_geo_model(&matrix, &coords, &config.geo) {
            Ok(law) => Some(law),
            Err(e) if config.weights.beta > 0.0 => return Err(e),
            Err(_) => None,
        };
        Ok(UsgModel {
            matrix,
            graph: SocialGraph::from_log(log),
            coords,
            geo,
            config,
        })
    }

    pub fn n_pois(&self) -> usize {
        self.matrix.n_pois()
    }

    pub fn history(&self, u: UserIx) -> Vec<PoiIx> {
        self.matrix.pois_of(u)
    }

    /// Component scores for `u` given an explicit sorted query history,
    /// normalized over the POIs outside that history.
    pub fn components(&self, u: UserIx, history: &[PoiIx]) -> Components {
        let mask = candidate_mask(self.n_pois(), history);
        let mut ubcf = ubcf_scores(&self.matrix, Some(u), history, self.config.k_neighbors);
        let mut social = social_scores(&self.matrix, &self.graph, u, history);
        max_normalize(&mut ubcf, &mask);
        max_normalize(&mut social, &mask);
        let geo = match &self.geo {
            Some(law) if !history.is_empty() => {
                let logs = geo::geo_log_scores(law, &self.coords, history);
                let max = logs
                    .iter()
                    .zip(&mask)
                    .filter(|(_, &c)| c)
                    .map(|(&s, _)| s)
                    .fold(f64::NEG_INFINITY, f64::max);
                logs.iter()
                    .zip(&mask)
                    .map(|(&s, &c)| if c { (s - max).exp() } else { 0.0 })
                    .collect()
            }
            _ => mask.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect(),
        };
        Components { ubcf, social, geo }
    }

    pub fn scores(&self, u: UserIx, history: &[PoiIx], weights: &UsgWeights) -> Vec<f64> {
        self.components(u, history).mix(weights)
    }

    pub fn user_scores(&self, u: UserIx, weights: &UsgWeights) -> Vec<f64> {
        self.scores(u, &self.history(u), weights)
    }

    pub fn recommend(&self, u: UserIx, n: usize, weights: &UsgWeights) -> Result<TopN> {
        let history = self.history(u);
        recommend_top_n(&self.scores(u, &history, weights), &history, n)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TopN {
    pub items: Vec<PoiIx>,
    pub scores: Vec<f64>,
    /// Fewer candidates than requested.
    pub short: bool,
}

/// Best `n` POIs outside the sorted `history` by score descending, ties by
/// ascending POI index (which is ascending POI id).
pub fn recommend_top_n(scores: &[f64], history: &[PoiIx], n: usize) -> Result<TopN> {
    if n == 0 {
        return Err(Error::invalid("N must be at least 1"));
    }
    let mask = candidate_mask(scores.len(), history);
    let mut cands: Vec<PoiIx> = (0..scores.len()).filter(|&p| mask[p]).collect();
    let cmp = |a: &PoiIx, b: &PoiIx| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    let short = cands.len() < n;
    if cands.len() > n {
        cands.select_nth_unstable_by(n - 1, cmp);
        cands.truncate(n);
    }
    cands.sort_by(cmp);
    Ok(TopN {
        scores: cands.iter().map(|&p| scores[p]).collect(),
        items: cands,
        short,
    })
}
