//! Training and querying the full model set on one training view.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{recommend_top_n, BaselineConfig, UsgModel, UsgWeights};
use crate::error::{Error, Result};
use crate::hybrid::{hybrid_recommend, HybridConfig, Path};
use crate::ingest::{CheckInLog, PoiIx, UserIx};
use crate::mati::{run_em, EmInit, EmReport, MatiConfig, MatiParams, MatiScorer, PrNu};
use crate::slabs::{SlabIndex, SlabProfiles};
use crate::univariate::{UnivariateConfig, UnivariateModel, UnivariateVariant};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSetConfig {
    pub baseline: BaselineConfig,
    pub univariate: UnivariateConfig,
    pub mati: MatiConfig,
    pub hybrid: HybridConfig,
}

impl ModelSetConfig {
    pub fn validate(&self) -> Result<()> {
        self.baseline.weights.validate()?;
        if self.baseline.k_neighbors == 0 {
            return Err(Error::config("usg.k_neighbors", "must be at least 1"));
        }
        if !(self.baseline.geo.bin_km > 0.0 && self.baseline.geo.d_min_km > 0.0) {
            return Err(Error::config("usg.bin_km", "bin width and d_min must be positive"));
        }
        self.univariate.validate()?;
        self.mati.validate()?;
        self.hybrid.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Ubcf,
    Usg,
    Usgt,
    Ubcft,
    Mati,
    Hybrid,
}

impl Model {
    pub const ALL: [Model; 6] = [Model::Ubcf, Model::Usg, Model::Usgt, Model::Ubcft, Model::Mati, Model::Hybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            Model::Ubcf => "ubcf",
            Model::Usg => "usg",
            Model::Usgt => "usgt",
            Model::Ubcft => "ubcft",
            Model::Mati => "mati",
            Model::Hybrid => "hybrid",
        }
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Model::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::config("model", format!("unknown model `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recommendation {
    pub items: Vec<PoiIx>,
    /// Ranking score per item. Quota-reranked lists report the USG score.
    pub scores: Vec<f64>,
    pub short: bool,
    pub path: Path,
    /// Mean Ψ behind a hybrid decision.
    pub mean_psi: Option<f64>,
}

/// Every trained model on one training view.
#[derive(Clone, Debug)]
pub struct ModelSet {
    pub train: CheckInLog,
    pub index: SlabIndex,
    pub usg: UsgModel,
    pub params: MatiParams,
    pub em_report: Option<EmReport>,
    pub profiles: SlabProfiles,
    pub cfg: ModelSetConfig,
}

impl ModelSet {
    pub fn train(train: CheckInLog, index: SlabIndex, cfg: ModelSetConfig) -> Result<Self> {
        cfg.validate()?;
        let (params, report) = run_em(&train, &index, &PrNu::VisitFrequency, &EmInit::GlobalPopularity, &cfg.mati.em)?;
        let mut set = ModelSet::with_params(train, index, params, cfg)?;
        set.em_report = Some(report);
        Ok(set)
    }

    /// Rebuilds the model set around previously trained parameters.
    pub fn with_params(train: CheckInLog, index: SlabIndex, params: MatiParams, cfg: ModelSetConfig) -> Result<Self> {
        cfg.validate()?;
        if params.slab_checksum != index.checksum {
            return Err(Error::Stale("parameters were trained against a different slab index".into()));
        }
        let usg = UsgModel::fit(&train, cfg.baseline)?;
        let profiles = SlabProfiles::build(&train, &index);
        Ok(ModelSet {
            train,
            index,
            usg,
            params,
            em_report: None,
            profiles,
            cfg,
        })
    }

    pub fn weights(&self) -> UsgWeights {
        self.cfg.baseline.weights
    }

    pub fn mati_scorer(&self) -> MatiScorer<'_> {
        MatiScorer {
            params: &self.params,
            profiles: &self.profiles,
            usg: &self.usg,
            weights: self.weights(),
            cfg: self.cfg.mati,
        }
    }

    pub fn univariate(&self) -> Result<UnivariateModel<'_>> {
        UnivariateModel::new(&self.usg, &self.train, self.cfg.univariate, self.weights())
    }

    /// A copy with a different φ; parameters are shared by value.
    pub fn with_phi(&self, phi: f64) -> Result<ModelSet> {
        let mut s = self.clone();
        s.cfg.mati.phi = phi;
        s.cfg.validate()?;
        Ok(s)
    }

    pub fn recommend(&self, model: Model, u: UserIx, n: usize) -> Result<Recommendation> {
        self.recommend_with(model, u, n, None)
    }

    /// As [`ModelSet::recommend`], reusing a univariate model when given.
    pub fn recommend_with(
        &self,
        model: Model,
        u: UserIx,
        n: usize,
        univariate: Option<&UnivariateModel<'_>>,
    ) -> Result<Recommendation> {
        if n == 0 {
            return Err(Error::invalid("N must be at least 1"));
        }
        let history = self.usg.history(u);
        let plain = |weights: &UsgWeights, path: Path| -> Result<Recommendation> {
            let top = recommend_top_n(&self.usg.scores(u, &history, weights), &history, n)?;
            Ok(Recommendation {
                items: top.items,
                scores: top.scores,
                short: top.short,
                path,
                mean_psi: None,
            })
        };
        match model {
            Model::Ubcf => plain(&UsgWeights::UBCF_ONLY, Path::NonTemporal),
            Model::Usg => plain(&self.weights(), Path::NonTemporal),
            Model::Usgt | Model::Ubcft => {
                let owned;
                let uni = match univariate {
                    Some(m) => m,
                    None => {
                        owned = self.univariate()?;
                        &owned
                    }
                };
                let variant = if model == Model::Usgt {
                    UnivariateVariant::Usgt
                } else {
                    UnivariateVariant::Ubcft
                };
                let out = uni.recommend(u, n, variant)?;
                let base = self.usg.scores(u, &history, &self.weights());
                Ok(Recommendation {
                    scores: out.items.iter().map(|&l| base[l]).collect(),
                    items: out.items,
                    short: out.short,
                    path: if out.temporal { Path::Temporal } else { Path::NonTemporal },
                    mean_psi: None,
                })
            }
            Model::Mati => {
                let top = self.mati_scorer().recommend(u, n)?;
                Ok(Recommendation {
                    items: top.items,
                    scores: top.scores,
                    short: top.short,
                    path: Path::Temporal,
                    mean_psi: None,
                })
            }
            Model::Hybrid => {
                let out = hybrid_recommend(&self.mati_scorer(), u, n, &self.cfg.hybrid)?;
                Ok(Recommendation {
                    items: out.list.items,
                    scores: out.list.scores,
                    short: out.list.short,
                    path: out.decision.path,
                    mean_psi: Some(out.decision.mean_psi),
                })
            }
        }
    }
}
