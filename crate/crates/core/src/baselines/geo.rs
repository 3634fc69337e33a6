//! Geographical influence as a power law over same-user POI distances.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::matrix::UserPoiMatrix;
use crate::error::{Error, Result};
use crate::ingest::PoiIx;

/// Mean Earth radius in km.
const EARTH_RADIUS_KM: f64 = 6371.0088;

pub fn haversine_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let h = ((lat2 - lat1) / 2.0).sin().powi(2)
        + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeoConfig {
    pub bin_km: f64,
    pub d_min_km: f64,
}

impl Default for GeoConfig {
    fn default() -> Self {
        GeoConfig {
            bin_km: 0.5,
            d_min_km: 0.1,
        }
    }
}

/// `Pr(d) = exp(a) · d^b` for `d ≥ d_min_km`; shorter distances are floored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub a: f64,
    pub b: f64,
    pub d_min_km: f64,
}

impl PowerLaw {
    /// Least-squares line through `(ln d, ln f)` via the 2×2 normal
    /// equation. Needs at least two distinct positive distances with
    /// positive frequency.
    pub fn fit_points(points: &[(f64, f64)], d_min_km: f64) -> Result<Self> {
        let pts: Vec<(f64, f64)> = points
            .iter()
            .filter(|&&(d, f)| d > 0.0 && f > 0.0)
            .map(|&(d, f)| (d.ln(), f.ln()))
            .collect();
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let det = n * sxx - sx * sx;
        if pts.len() < 2 || det.abs() <= 1e-12 * n * sxx.max(1.0) {
            return Err(Error::invalid(
                "power-law fit needs at least two distinct distance bins",
            ));
        }
        let b = (n * sxy - sx * sy) / det;
        let a = (sy - b * sx) / n;
        Ok(PowerLaw { a, b, d_min_km })
    }

    pub fn ln_pr(&self, d_km: f64) -> f64 {
        self.a + self.b * d_km.max(self.d_min_km).ln()
    }

    pub fn pr(&self, d_km: f64) -> f64 {
        self.ln_pr(d_km).exp()
    }
}

/// Bins distances at `cfg.bin_km` (after the `d_min` floor), turns the
/// counts into relative frequencies at the bin centres and fits the law.
pub fn fit_power_law(distances: &[f64], cfg: &GeoConfig) -> Result<PowerLaw> {
    let mut bins: BTreeMap<u64, u64> = BTreeMap::new();
    for &d in distances {
        *bins.entry(bin_of(d, cfg)).or_default() += 1;
    }
    fit_bins(&bins, distances.len() as u64, cfg)
}

fn bin_of(d: f64, cfg: &GeoConfig) -> u64 {
    (d.max(cfg.d_min_km) / cfg.bin_km).floor() as u64
}

fn fit_bins(bins: &BTreeMap<u64, u64>, total: u64, cfg: &GeoConfig) -> Result<PowerLaw> {
    let points: Vec<(f64, f64)> = bins
        .iter()
        .map(|(&i, &c)| ((i as f64 + 0.5) * cfg.bin_km, c as f64 / total as f64))
        .collect();
    PowerLaw::fit_points(&points, cfg.d_min_km)
}

/// Fits the law to the distances of all pairs of distinct POIs visited by
/// the same user.
pub fn fit_geo_model(matrix: &UserPoiMatrix, coords: &[(f64, f64)], cfg: &GeoConfig) -> Result<PowerLaw> {
    let bins = (0..matrix.n_users())
        .into_par_iter()
        .map(|u| {
            let pois = matrix.pois_of(u);
            let mut bins: BTreeMap<u64, u64> = BTreeMap::new();
            for (i, &p) in pois.iter().enumerate() {
                for &q in &pois[i + 1..] {
                    *bins.entry(bin_of(haversine_km(coords[p], coords[q]), cfg)).or_default() += 1;
                }
            }
            bins
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });
    let total = bins.values().sum();
    fit_bins(&bins, total, cfg)
}

/// `Σ_h ln Pr(dist(l, h))` over the history for every POI `l`.
pub fn geo_log_scores(law: &PowerLaw, coords: &[(f64, f64)], history: &[PoiIx]) -> Vec<f64> {
    coords
        .iter()
        .map(|&c| history.iter().map(|&h| law.ln_pr(haversine_km(c, coords[h]))).sum())
        .collect()
}

/// Geo factor of one candidate, before per-user normalization.
pub fn geo_score(law: &PowerLaw, coords: &[(f64, f64)], history: &[PoiIx], l: PoiIx) -> f64 {
    history
        .iter()
        .map(|&h| law.ln_pr(haversine_km(coords[l], coords[h])))
        .sum::<f64>()
        .exp()
}
