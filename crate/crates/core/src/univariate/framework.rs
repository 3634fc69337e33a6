//! Threshold framework: users whose effective act reaches `T` get the
//! quota re-ranking over USG candidates, everyone else plain USG.

use serde::{Deserialize, Serialize};

use crate::baselines::{recommend_top_n, UsgModel, UsgWeights};
use crate::error::Result;
use crate::ingest::{CheckInLog, PoiIx, UserIx};
use crate::univariate::{
    effective_user_act, m_avg_recommend, poi_acts, CStarSource, PoiAct, UnivariateConfig, UserActProfile,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnivariateVariant {
    /// `c*` from leave-one-out USG scores.
    Usgt,
    /// `ĉ* ≡ 1`.
    Ubcft,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameworkOutput {
    pub items: Vec<PoiIx>,
    /// The temporal (quota) path was taken.
    pub temporal: bool,
    pub effective_act: Option<f64>,
    pub short: bool,
}

/// Trained univariate recommender over a USG model and its training log.
#[derive(Clone, Debug)]
pub struct UnivariateModel<'a> {
    pub usg: &'a UsgModel,
    pub train: &'a CheckInLog,
    pub acts: Vec<Option<PoiAct>>,
    pub cfg: UnivariateConfig,
    pub weights: UsgWeights,
}

impl<'a> UnivariateModel<'a> {
    pub fn new(usg: &'a UsgModel, train: &'a CheckInLog, cfg: UnivariateConfig, weights: UsgWeights) -> Result<Self> {
        cfg.validate()?;
        Ok(UnivariateModel {
            usg,
            train,
            acts: poi_acts(train, cfg.utc_offset_secs),
            cfg,
            weights,
        })
    }

    /// `None` for users with fewer than two distinct POIs.
    pub fn profile(&self, u: UserIx, variant: UnivariateVariant) -> Option<UserActProfile> {
        let source = match variant {
            UnivariateVariant::Usgt => CStarSource::Usg(self.usg, self.weights),
            UnivariateVariant::Ubcft => CStarSource::Uniform,
        };
        effective_user_act(self.train, u, &self.cfg, source).ok()
    }

    /// Runs the framework with a precomputed profile.
    pub fn recommend_with(&self, u: UserIx, n: usize, profile: Option<&UserActProfile>) -> Result<FrameworkOutput> {
        let history = self.usg.history(u);
        let scores = self.usg.scores(u, &history, &self.weights);
        let rho = recommend_top_n(&scores, &history, n.saturating_mul(self.cfg.k).max(1))?;
        let act = profile.map(|p| p.effective_act);
        match profile {
            Some(p) if p.effective_act >= self.cfg.t => {
                let deltas: Vec<Option<f64>> = rho.items.iter().map(|&l| self.acts[l].map(|a| a.act)).collect();
                let out = m_avg_recommend(&rho.items, &deltas, p.avg_d, p.avg_e, &self.cfg, n)?;
                Ok(FrameworkOutput {
                    items: out.items,
                    temporal: true,
                    effective_act: act,
                    short: out.short,
                })
            }
            _ => {
                let top = recommend_top_n(&scores, &history, n)?;
                Ok(FrameworkOutput {
                    items: top.items,
                    temporal: false,
                    effective_act: act,
                    short: top.short,
                })
            }
        }
    }

    pub fn recommend(&self, u: UserIx, n: usize, variant: UnivariateVariant) -> Result<FrameworkOutput> {
        let profile = self.profile(u, variant);
        self.recommend_with(u, n, profile.as_ref())
    }
}

pub fn usgt_framework(model: &UnivariateModel<'_>, u: UserIx, n: usize, variant: UnivariateVariant) -> Result<FrameworkOutput> {
    model.recommend(u, n, variant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::BaselineConfig;
    use crate::univariate::effective_user_act_from;
    use crate::univariate::test_support::weekly_log;

    fn setup() -> (CheckInLog, UsgModel) {
        // A weekday crowd on w1..w4 and a weekend crowd on e1..e4, both
        // sharing `w1` and `mix`.
        let mut visits: Vec<(String, &str, bool)> = Vec::new();
        for u in 0..6 {
            for p in ["w1", "w2", "w3", "w4"].iter().take(2 + u % 3) {
                visits.push((format!("d{u}"), p, false));
            }
            visits.push((format!("d{u}"), "mix", false));
        }
        for u in 0..6 {
            for p in ["e1", "e2", "e3", "e4"].iter().take(2 + u % 3) {
                visits.push((format!("e{u}"), p, true));
            }
            visits.push((format!("e{u}"), "w1", false));
            visits.push((format!("e{u}"), "mix", true));
        }
        let visits: Vec<(&str, &str, bool)> = visits.iter().map(|(u, p, w)| (u.as_str(), *p, *w)).collect();
        let log = weekly_log(&visits);
        let cfg = BaselineConfig {
            weights: UsgWeights::UBCF_ONLY,
            ..Default::default()
        };
        let usg = UsgModel::fit(&log, cfg).unwrap();
        (log, usg)
    }

    fn profile_with_act(act: f64) -> UserActProfile {
        // p^d = 0.5 + act, ĉ* ≡ 1 → Ãvg^d − Ãvg^e = 2·act.
        effective_user_act_from(0, &[(0, 0.5 + act / 2.0, 0.5 - act / 2.0, 1.0), (1, 0.5 + act / 2.0, 0.5 - act / 2.0, 1.0)], 0.5)
            .unwrap()
    }

    #[test]
    fn threshold_routing() {
        let (log, usg) = setup();
        let m = UnivariateModel::new(&usg, &log, UnivariateConfig::default(), UsgWeights::UBCF_ONLY).unwrap();
        let u = log.user_index("d0").unwrap();
        let high = profile_with_act(0.2);
        assert!(m.recommend_with(u, 3, Some(&high)).unwrap().temporal);
        let low = profile_with_act(0.05);
        assert!(!m.recommend_with(u, 3, Some(&low)).unwrap().temporal);
        let mut exact = profile_with_act(0.1);
        exact.effective_act = 1.0 / 7.0;
        assert!(m.recommend_with(u, 3, Some(&exact)).unwrap().temporal);
        assert!(!m.recommend_with(u, 3, None).unwrap().temporal);
    }

    #[test]
    fn weekday_user_gets_weekday_pois() {
        let (log, usg) = setup();
        let m = UnivariateModel::new(&usg, &log, UnivariateConfig::default(), UsgWeights::UBCF_ONLY).unwrap();
        let u = log.user_index("d0").unwrap();
        let out = m.recommend(u, 2, UnivariateVariant::Ubcft).unwrap();
        assert!(out.temporal);
        for &l in &out.items {
            assert!(m.acts[l].unwrap().act > 0.0, "{}", log.poi_id(l));
        }
    }

    #[test]
    fn uniform_c_star_matches_orientation_of_equal_usg_scores() {
        let rows = [(0, 0.8, 0.2, 0.3), (1, 0.4, 0.6, 0.3)];
        let a = effective_user_act_from(0, &rows, 0.5).unwrap();
        let uniform: Vec<_> = rows.iter().map(|&(p, d, e, _)| (p, d, e, 1.0)).collect();
        let b = effective_user_act_from(0, &uniform, 0.5).unwrap();
        assert_eq!(a.orientation, b.orientation);
    }
}
