//! Per-user choice between MATI and USG, driven by the mean shared slab
//! activity between the user and their USG short list.

use serde::{Deserialize, Serialize};

use crate::baselines::{recommend_top_n, TopN};
use crate::error::{Error, Result};
use crate::ingest::{CheckInLog, PoiIx, UserIx};
use crate::mati::MatiScorer;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HybridConfig {
    /// Closed interval of mean Ψ in which the temporal path applies.
    pub psi_range: (f64, f64),
    /// Length of the USG list the mean Ψ is taken over; `None` uses the
    /// requested list length.
    pub probe_n: Option<usize>,
}

impl HybridConfig {
    pub const BRIGHTKITE: HybridConfig = HybridConfig {
        psi_range: (0.4, 0.9),
        probe_n: None,
    };
    pub const FOURSQUARE: HybridConfig = HybridConfig {
        psi_range: (0.4, 0.8),
        probe_n: None,
    };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let c = HybridConfig {
            psi_range: (lo, hi),
            probe_n: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.psi_range;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::config("hybrid.psi_range", "must satisfy 0 <= lo <= hi <= 1"));
        }
        if self.probe_n == Some(0) {
            return Err(Error::config("hybrid.probe_n", "must be at least 1"));
        }
        Ok(())
    }
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig::FOURSQUARE
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Path {
    Temporal,
    NonTemporal,
}

impl Path {
    pub fn as_str(self) -> &'static str {
        match self {
            Path::Temporal => "temporal",
            Path::NonTemporal => "non_temporal",
        }
    }
}

/// Mean of `psi(l)` over the candidates.
pub fn avg_shared_activity(candidates: &[PoiIx], psi: impl Fn(PoiIx) -> f64) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::invalid("empty candidate list"));
    }
    Ok(candidates.iter().map(|&l| psi(l)).sum::<f64>() / candidates.len() as f64)
}

pub fn decide(mean_psi: f64, cfg: &HybridConfig) -> Path {
    let (lo, hi) = cfg.psi_range;
    if lo <= mean_psi && mean_psi <= hi {
        Path::Temporal
    } else {
        Path::NonTemporal
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub user: UserIx,
    pub mean_psi: f64,
    pub path: Path,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HybridOutput {
    pub list: TopN,
    pub decision: Decision,
}

pub fn hybrid_recommend(scorer: &MatiScorer<'_>, u: UserIx, n: usize, cfg: &HybridConfig) -> Result<HybridOutput> {
    if n == 0 {
        return Err(Error::invalid("N must be at least 1"));
    }
    let history = scorer.usg.history(u);
    let usg_scores = scorer.usg.scores(u, &history, &scorer.weights);
    let probe = recommend_top_n(&usg_scores, &history, cfg.probe_n.unwrap_or(n))?;
    let mean_psi = if probe.items.is_empty() {
        0.0
    } else {
        avg_shared_activity(&probe.items, |l| scorer.psi(u, l))?
    };
    let path = decide(mean_psi, cfg);
    let list = match path {
        Path::Temporal => recommend_top_n(&scorer.scores(u, &history), &history, n)?,
        Path::NonTemporal => recommend_top_n(&usg_scores, &history, n)?,
    };
    Ok(HybridOutput {
        list,
        decision: Decision { user: u, mean_psi, path },
    })
}

/// `user_id,mean_psi,path,run_timestamp` rows.
pub fn decision_log_csv(log: &CheckInLog, decisions: &[Decision], run_timestamp: &str) -> String {
    let mut out = String::from("user_id,mean_psi,path,run_timestamp\n");
    for d in decisions {
        out.push_str(&format!(
            "{},{:.6},{},{}\n",
            log.user_id(d.user),
            d.mean_psi,
            d.path.as_str(),
            run_timestamp
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_psi_cases() {
        assert_eq!(avg_shared_activity(&[0, 1], |_| 1.0).unwrap(), 1.0);
        assert_eq!(avg_shared_activity(&[0, 1], |_| 0.0).unwrap(), 0.0);
        let v = [0.2, 0.6];
        assert!((avg_shared_activity(&[0, 1], |l| v[l]).unwrap() - 0.4).abs() < 1e-15);
        assert!(avg_shared_activity(&[], |_| 1.0).is_err());
    }

    #[test]
    fn decision_interval_is_closed() {
        let b = HybridConfig::BRIGHTKITE;
        assert_eq!(decide(0.5, &b), Path::Temporal);
        assert_eq!(decide(0.95, &b), Path::NonTemporal);
        assert_eq!(decide(0.4, &b), Path::Temporal);
        assert_eq!(decide(0.9, &b), Path::Temporal);
        assert_eq!(decide(0.39, &b), Path::NonTemporal);
        assert_eq!(HybridConfig::FOURSQUARE.psi_range, (0.4, 0.8));
    }

    #[test]
    fn invalid_ranges_rejected() {
        assert!(HybridConfig::new(0.6, 0.5).is_err());
        assert!(HybridConfig::new(-0.1, 0.5).is_err());
        assert!(HybridConfig::new(0.0, 1.0).is_ok());
    }
}
