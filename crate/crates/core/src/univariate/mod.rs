//! Single-factor (weekday/weekend) temporal model: POI and user acts, the
//! effective user act, the threshold framework and quota-based re-ranking.

pub mod framework;
pub mod mavg;
pub mod profile;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CheckInLog, PoiIx, UserIx};
use crate::temporal::is_weekend;

pub use framework::{usgt_framework, FrameworkOutput, UnivariateModel, UnivariateVariant};
pub use mavg::{m_avg_quotas, m_avg_recommend, MAvgOutput};
pub use profile::{effective_user_act, effective_user_act_from, CStarSource, Orientation, PoiContribution, UserActProfile};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnivariateConfig {
    /// Orientation threshold `T` on the effective user act.
    pub t: f64,
    pub lambda: f64,
    /// POI act cut separating weekday from weekend POIs.
    pub theta: f64,
    /// Share of the list reserved for neutral POIs.
    pub xi: f64,
    /// Candidate multiplier: `K·N` USG candidates feed the re-ranking.
    pub k: usize,
    pub min_users: usize,
    pub min_pois: usize,
    pub utc_offset_secs: i64,
}

impl Default for UnivariateConfig {
    fn default() -> Self {
        UnivariateConfig {
            t: 1.0 / 7.0,
            lambda: 0.5,
            theta: 0.0,
            xi: 0.1,
            k: 10,
            min_users: 5,
            min_pois: 8,
            utc_offset_secs: 0,
        }
    }
}

impl UnivariateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t < 1.0) {
            return Err(Error::config("univariate.t", "must lie in (0, 1)"));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::config("univariate.lambda", "must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.xi) {
            return Err(Error::config("univariate.xi", "must lie in [0, 1)"));
        }
        if self.k < 1 {
            return Err(Error::config("univariate.k", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoiAct {
    pub poi: PoiIx,
    pub weekday: u32,
    pub weekend: u32,
    pub act: f64,
}

impl PoiAct {
    pub fn from_counts(poi: PoiIx, weekday: u32, weekend: u32) -> Result<Self> {
        let n = weekday + weekend;
        if n == 0 {
            return Err(Error::invalid("POI has no visits"));
        }
        Ok(PoiAct {
            poi,
            weekday,
            weekend,
            act: (weekday as f64 - weekend as f64) / n as f64,
        })
    }

    pub fn total(&self) -> u32 {
        self.weekday + self.weekend
    }
}

pub fn poi_act(log: &CheckInLog, poi: PoiIx, utc_offset_secs: i64) -> Result<PoiAct> {
    let (mut d, mut e) = (0, 0);
    for c in log.poi_checkins(poi) {
        if is_weekend(c.timestamp, utc_offset_secs) {
            e += 1;
        } else {
            d += 1;
        }
    }
    PoiAct::from_counts(poi, d, e)
}

/// POI acts of the whole table; `None` for POIs without visits.
pub fn poi_acts(log: &CheckInLog, utc_offset_secs: i64) -> Vec<Option<PoiAct>> {
    (0..log.n_pois())
        .map(|p| poi_act(log, p, utc_offset_secs).ok())
        .collect()
}

/// Weekday and weekend visit counts of `u` per visited POI.
pub fn user_poi_counts(log: &CheckInLog, u: UserIx, utc_offset_secs: i64) -> BTreeMap<PoiIx, (u32, u32)> {
    let mut m: BTreeMap<PoiIx, (u32, u32)> = BTreeMap::new();
    for c in log.history(u) {
        let e = m.entry(c.poi).or_default();
        if is_weekend(c.timestamp, utc_offset_secs) {
            e.1 += 1;
        } else {
            e.0 += 1;
        }
    }
    m
}

/// `(p^d, p^e)` of a user at one POI.
pub fn user_poi_probs(log: &CheckInLog, u: UserIx, poi: PoiIx, utc_offset_secs: i64) -> Result<(f64, f64)> {
    let (d, e) = user_poi_counts(log, u, utc_offset_secs)
        .get(&poi)
        .copied()
        .ok_or_else(|| Error::invalid("user never visited the POI"))?;
    Ok(probs_of(d, e))
}

pub(crate) fn probs_of(d: u32, e: u32) -> (f64, f64) {
    let n = (d + e) as f64;
    (d as f64 / n, e as f64 / n)
}

/// Mean over visitors of `|p^d − p^e|`; `None` when fewer than `min_users`
/// distinct users visited the POI.
pub fn absolute_poi_act(log: &CheckInLog, poi: PoiIx, min_users: usize, utc_offset_secs: i64) -> Option<f64> {
    let mut per_user: BTreeMap<UserIx, (u32, u32)> = BTreeMap::new();
    for c in log.poi_checkins(poi) {
        let e = per_user.entry(c.user).or_default();
        if is_weekend(c.timestamp, utc_offset_secs) {
            e.1 += 1;
        } else {
            e.0 += 1;
        }
    }
    if per_user.len() < min_users.max(1) {
        return None;
    }
    let sum: f64 = per_user
        .values()
        .map(|&(d, e)| {
            let (pd, pe) = probs_of(d, e);
            (pd - pe).abs()
        })
        .sum();
    Some(sum / per_user.len() as f64)
}

/// Mean over the user's distinct POIs of `|p^d − p^e|`; `None` below
/// `min_pois` distinct POIs.
pub fn absolute_user_act(log: &CheckInLog, u: UserIx, min_pois: usize, utc_offset_secs: i64) -> Option<f64> {
    let counts = user_poi_counts(log, u, utc_offset_secs);
    if counts.len() < min_pois.max(1) {
        return None;
    }
    let sum: f64 = counts
        .values()
        .map(|&(d, e)| {
            let (pd, pe) = probs_of(d, e);
            (pd - pe).abs()
        })
        .sum();
    Some(sum / counts.len() as f64)
}

/// Counts of values in ten bins of width 0.1 over `[0, 1]`; 1.0 lands in
/// the last bin.
pub fn act_histogram(values: &[f64]) -> [u64; 10] {
    let mut h = [0; 10];
    for &v in values {
        let b = ((v * 10.0).floor() as usize).min(9);
        h[b] += 1;
    }
    h
}

/// Fraction of values strictly above `t`.
pub fn mass_above(values: &[f64], t: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|&&v| v > t).count() as f64 / values.len() as f64
}

pub fn histogram_csv(values: &[f64]) -> String {
    let h = act_histogram(values);
    let total = values.len().max(1) as f64;
    let mut out = String::from("bin_lo,bin_hi,count,fraction\n");
    for (i, &c) in h.iter().enumerate() {
        out.push_str(&format!(
            "{:.1},{:.1},{},{:.6}\n",
            i as f64 / 10.0,
            (i + 1) as f64 / 10.0,
            c,
            c as f64 / total
        ));
    }
    out
}

#[cfg(test)]
pub(crate) mod test_support {
    use crate::ingest::{CheckInLog, RawCheckIn, SocialEdges};

    /// Monday 2010-04-05 12:00 UTC.
    pub const MONDAY: i64 = 1_270_468_800;
    /// Saturday 2010-04-10 12:00 UTC.
    pub const SATURDAY: i64 = MONDAY + 5 * 86_400;

    /// Builds a log from `(user, poi, weekend?)` visits.
    pub fn weekly_log(visits: &[(&str, &str, bool)]) -> CheckInLog {
        let recs = visits
            .iter()
            .enumerate()
            .map(|(i, &(u, p, we))| RawCheckIn {
                user_id: u.into(),
                poi_id: p.into(),
                timestamp: if we { SATURDAY } else { MONDAY } + i as i64,
                lat: 0.0,
                lon: 0.0,
            })
            .collect();
        CheckInLog::new(recs, SocialEdges::default())
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::temporal::is_weekend;

    #[test]
    fn weekend_boundaries() {
        assert!(is_weekend(SATURDAY, 0));
        assert!(!is_weekend(MONDAY, 0));
        // Friday 23:59:59.
        assert!(!is_weekend(SATURDAY - 12 * 3600 - 1, 0));
    }

    #[test]
    fn poi_act_cases() {
        assert_eq!(PoiAct::from_counts(0, 3, 1).unwrap().act, 0.5);
        assert_eq!(PoiAct::from_counts(0, 0, 4).unwrap().act, -1.0);
        assert_eq!(PoiAct::from_counts(0, 2, 2).unwrap().act, 0.0);
        assert!(PoiAct::from_counts(0, 0, 0).is_err());
        let log = weekly_log(&[("u", "a", false), ("v", "a", false), ("v", "a", false), ("u", "a", true)]);
        let a = poi_act(&log, 0, 0).unwrap();
        assert_eq!((a.weekday, a.weekend, a.total()), (3, 1, 4));
    }

    #[test]
    fn user_poi_prob_cases() {
        let log = weekly_log(&[
            ("u", "a", false),
            ("u", "a", false),
            ("u", "a", true),
            ("u", "a", true),
            ("u", "b", false),
            ("u", "c", false),
            ("u", "c", true),
            ("u", "c", true),
        ]);
        assert_eq!(user_poi_probs(&log, 0, 0, 0).unwrap(), (0.5, 0.5));
        assert_eq!(user_poi_probs(&log, 0, 1, 0).unwrap(), (1.0, 0.0));
        let (d, e) = user_poi_probs(&log, 0, 2, 0).unwrap();
        assert!((d - 1.0 / 3.0).abs() < 1e-12 && (e - 2.0 / 3.0).abs() < 1e-12);
        let other = weekly_log(&[("u", "a", false), ("v", "b", true)]);
        assert!(user_poi_probs(&other, 0, 1, 0).is_err());
    }

    #[test]
    fn absolute_poi_act_cases() {
        let all_weekday = weekly_log(&[("u", "a", false), ("v", "a", false)]);
        assert_eq!(absolute_poi_act(&all_weekday, 0, 2, 0), Some(1.0));
        let balanced = weekly_log(&[("u", "a", false), ("u", "a", true), ("v", "a", true), ("v", "a", false)]);
        assert_eq!(absolute_poi_act(&balanced, 0, 2, 0), Some(0.0));
        let mixed = weekly_log(&[("u", "a", false), ("v", "a", true), ("v", "a", false)]);
        assert_eq!(absolute_poi_act(&mixed, 0, 2, 0), Some(0.5));
        assert_eq!(absolute_poi_act(&mixed, 0, 5, 0), None);
    }

    #[test]
    fn absolute_user_act_cases() {
        let fully = weekly_log(&[("u", "a", false), ("u", "b", true)]);
        assert_eq!(absolute_user_act(&fully, 0, 2, 0), Some(1.0));
        let balanced = weekly_log(&[("u", "a", false), ("u", "a", true), ("u", "b", true), ("u", "b", false)]);
        assert_eq!(absolute_user_act(&balanced, 0, 2, 0), Some(0.0));
        let mixed = weekly_log(&[("u", "a", false), ("u", "b", true), ("u", "b", false)]);
        assert_eq!(absolute_user_act(&mixed, 0, 2, 0), Some(0.5));
        assert_eq!(absolute_user_act(&mixed, 0, 8, 0), None);
    }

    #[test]
    fn histogram_bins() {
        let h = act_histogram(&[0.0, 0.05, 0.1, 0.99, 1.0]);
        assert_eq!(h[0], 2);
        assert_eq!(h[1], 1);
        assert_eq!(h[9], 2);
        assert_eq!(mass_above(&[0.1, 0.2, 0.3, 0.0], 1.0 / 7.0), 0.5);
        let csv = histogram_csv(&[0.5]);
        assert!(csv.contains("0.5,0.6,1,1.000000"));
    }
}
