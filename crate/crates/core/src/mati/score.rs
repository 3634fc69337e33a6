//! Extent (shared slab activity Ψ) and depth (averaged latent joint) of the
//! temporal correlation between a user and a candidate POI, and their
//! φ-mixture.

use serde::{Deserialize, Serialize};

use crate::baselines::{candidate_mask, max_normalize, recommend_top_n, TopN, UsgModel, UsgWeights};
use crate::error::{Error, Result};
use crate::ingest::{PoiIx, UserIx};
use crate::mati::em::{EmConfig, MatiParams};
use crate::slabs::{SlabProfile, SlabProfiles};

/// Which slab assignments the depth term averages over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthSupport {
    /// Every multi-aspect slab.
    AllSlabs,
    /// Only the slabs the query user has checked in at; all slabs when the
    /// user has none.
    UserSlabs,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatiConfig {
    pub phi: f64,
    pub em: EmConfig,
    pub depth: DepthSupport,
}

impl Default for MatiConfig {
    fn default() -> Self {
        MatiConfig {
            phi: 0.7,
            em: EmConfig::default(),
            depth: DepthSupport::AllSlabs,
        }
    }
}

impl MatiConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.phi) {
            return Err(Error::config("mati.phi", "must lie in [0, 1]"));
        }
        if !(self.em.gamma > 0.0) {
            return Err(Error::config("mati.gamma", "must be positive"));
        }
        if !(self.em.tol > 0.0) || self.em.max_iter == 0 {
            return Err(Error::config("mati.tol", "tol must be positive and max_iter at least 1"));
        }
        Ok(())
    }
}

/// Jaccard overlap of the two profiles' slab sets.
pub fn psi_shared_activity(u: &SlabProfile, l: &SlabProfile) -> Result<f64> {
    if u.is_empty() && l.is_empty() {
        return Err(Error::invalid("shared activity of two empty profiles is undefined"));
    }
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    let (a, b) = (&u.counts, &l.counts);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(inter as f64 / (a.len() + b.len() - inter) as f64)
}

pub fn mati_score(psi_normalized: f64, depth_normalized: f64, phi: f64) -> f64 {
    phi * psi_normalized + (1.0 - phi) * depth_normalized
}

/// Raw (unnormalized) score components over all POIs.
#[derive(Clone, Debug, PartialEq)]
pub struct MatiComponents {
    pub psi: Vec<f64>,
    pub depth: Vec<f64>,
}

impl MatiComponents {
    /// Max-normalizes both components over the candidates and mixes them.
    pub fn mix(&self, phi: f64, is_candidate: &[bool]) -> Vec<f64> {
        let mut psi = self.psi.clone();
        let mut depth = self.depth.clone();
        max_normalize(&mut psi, is_candidate);
        max_normalize(&mut depth, is_candidate);
        psi.iter().zip(&depth).map(|(&p, &d)| mati_score(p, d, phi)).collect()
    }
}

/// Scores candidates for a query user from trained parameters, slab
/// profiles of the training view and the USG model supplying `Pr_ν`.
#[derive(Clone, Debug)]
pub struct MatiScorer<'a> {
    pub params: &'a MatiParams,
    pub profiles: &'a SlabProfiles,
    pub usg: &'a UsgModel,
    pub weights: UsgWeights,
    pub cfg: MatiConfig,
}

impl MatiScorer<'_> {
    /// Ψ of `u` against a POI; 0 when both profiles are empty.
    pub fn psi(&self, u: UserIx, l: PoiIx) -> f64 {
        psi_shared_activity(self.profiles.user(u), self.profiles.poi(l)).unwrap_or(0.0)
    }

    /// Mean over the depth support of `exp(joint)` for `u` and `l`.
    pub fn depth(&self, u: UserIx, l: PoiIx, pr_nu: f64) -> f64 {
        let dist = self.params.slab_distribution(u, l);
        let user = self.profiles.user(u);
        let support: Vec<usize> = match self.cfg.depth {
            DepthSupport::UserSlabs if !user.is_empty() => user.slab_set().collect(),
            _ => (0..dist.len()).collect(),
        };
        let sum: f64 = support.iter().map(|&z| pr_nu * dist[z]).sum();
        sum / support.len() as f64
    }

    pub fn components(&self, u: UserIx, history: &[PoiIx]) -> MatiComponents {
        let nu = self.usg.scores(u, history, &self.weights);
        let mask = candidate_mask(nu.len(), history);
        let psi = (0..nu.len())
            .map(|l| if mask[l] { self.psi(u, l) } else { 0.0 })
            .collect();
        let depth = (0..nu.len())
            .map(|l| if mask[l] { self.depth(u, l, nu[l]) } else { 0.0 })
            .collect();
        MatiComponents { psi, depth }
    }

    pub fn scores(&self, u: UserIx, history: &[PoiIx]) -> Vec<f64> {
        let mask = candidate_mask(self.usg.n_pois(), history);
        self.components(u, history).mix(self.cfg.phi, &mask)
    }

    pub fn recommend(&self, u: UserIx, n: usize) -> Result<TopN> {
        let history = self.usg.history(u);
        recommend_top_n(&self.scores(u, &history), &history, n)
    }
}
