//! Run configuration: one TOML file with a section per stage, environment
//! overrides `MATI_<SECTION>_<KEY>` and per-stage seeds split from one
//! root seed.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{BaselineConfig, GeoConfig, UsgWeights};
use crate::error::{Error, Result};
use crate::evaluation::SplitConfig;
use crate::hybrid::HybridConfig;
use crate::ingest::{CheckInFormat, OnLineError};
use crate::mati::{DepthSupport, EmConfig, MatiConfig};
use crate::pipeline::ModelSetConfig;
use crate::sampling::CollectConfig;
use crate::slabs::{CompletionConfig, ExtractConfig, VectorMode};
use crate::temporal::{SlotKind, TemporalFactorSpec};
use crate::univariate::UnivariateConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub checkins: PathBuf,
    /// Empty for no social file.
    pub social: PathBuf,
    pub columns: String,
    pub on_error: OnLineError,
    pub utc_offset_secs: i64,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            checkins: PathBuf::from("checkins.tsv"),
            social: PathBuf::new(),
            columns: "user,time,lat,lon,poi".into(),
            on_error: OnLineError::Abort,
            utc_offset_secs: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FactorsSection {
    pub kinds: Vec<SlotKind>,
}

impl Default for FactorsSection {
    fn default() -> Self {
        FactorsSection {
            kinds: vec![SlotKind::HourOfDay, SlotKind::DayOfWeek],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingSection {
    pub m_min: u32,
    pub n_percent: f64,
    pub max_rounds: usize,
    pub strata_low: usize,
    pub strata_high: usize,
    pub vector_mode: VectorMode,
}

impl Default for SamplingSection {
    fn default() -> Self {
        let c = CollectConfig::default();
        SamplingSection {
            m_min: c.m_min,
            n_percent: c.n_percent,
            max_rounds: c.max_rounds,
            strata_low: c.strata.0,
            strata_high: c.strata.1,
            vector_mode: c.vector_mode,
        }
    }
}

/// HAC similarity thresholds per factor kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HacSection {
    pub minute: f64,
    pub hour: f64,
    pub day: f64,
}

impl Default for HacSection {
    fn default() -> Self {
        let t = ExtractConfig::default().default_threshold;
        HacSection {
            minute: t,
            hour: t,
            day: t,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UsgSection {
    pub alpha: f64,
    pub beta: f64,
    pub k_neighbors: usize,
    pub bin_km: f64,
    pub d_min_km: f64,
}

impl Default for UsgSection {
    fn default() -> Self {
        let b = BaselineConfig::default();
        UsgSection {
            alpha: b.weights.alpha,
            beta: b.weights.beta,
            k_neighbors: b.k_neighbors,
            bin_km: b.geo.bin_km,
            d_min_km: b.geo.d_min_km,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnivariateSection {
    pub t: f64,
    pub lambda: f64,
    pub theta: f64,
    pub xi: f64,
    pub k: usize,
    pub min_users: usize,
    pub min_pois: usize,
}

impl Default for UnivariateSection {
    fn default() -> Self {
        let u = UnivariateConfig::default();
        UnivariateSection {
            t: u.t,
            lambda: u.lambda,
            theta: u.theta,
            xi: u.xi,
            k: u.k,
            min_users: u.min_users,
            min_pois: u.min_pois,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatiSection {
    pub phi_t: f64,
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub depth: DepthSupport,
}

impl Default for MatiSection {
    fn default() -> Self {
        let m = MatiConfig::default();
        MatiSection {
            phi_t: m.phi,
            gamma: m.em.gamma,
            tol: m.em.tol,
            max_iter: m.em.max_iter,
            depth: m.depth,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HybridSection {
    pub psi_range: [f64; 2],
    /// USG list length the mean Ψ is taken over; 0 uses the requested N.
    pub probe_n: usize,
}

impl Default for HybridSection {
    fn default() -> Self {
        let h = HybridConfig::default();
        HybridSection {
            psi_range: [h.psi_range.0, h.psi_range.1],
            probe_n: h.probe_n.unwrap_or(0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub x: f64,
    pub ns: Vec<usize>,
    pub test_fraction: f64,
    /// Tuning population: users with at least this many check-ins.
    pub tune_min_checkins: usize,
    pub tune_fraction: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        let s = SplitConfig::default();
        EvalSection {
            x: s.x,
            ns: vec![5, 10, 20],
            test_fraction: s.test_fraction,
            tune_min_checkins: 15,
            tune_fraction: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 42,
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataSection,
    pub factors: FactorsSection,
    pub sampling: SamplingSection,
    pub hac: HacSection,
    pub mf: CompletionConfig,
    pub usg: UsgSection,
    pub univariate: UnivariateSection,
    pub mati: MatiSection,
    pub hybrid: HybridSection,
    pub eval: EvalSection,
    pub run: RunSection,
}

fn type_name(v: &toml::Value) -> &'static str {
    v.type_str()
}

/// Rejects keys absent from `reference` and leaves of the wrong type,
/// widening integers where floats are expected.
fn check_tree(reference: &toml::Table, given: &mut toml::Table, path: &str) -> Result<()> {
    for (key, value) in given.iter_mut() {
        let here = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
        let Some(expected) = reference.get(key) else {
            return Err(Error::config(here, "unknown key"));
        };
        match (expected, &mut *value) {
            (toml::Value::Table(r), toml::Value::Table(g)) => check_tree(r, g, &here)?,
            (toml::Value::Float(_), toml::Value::Integer(i)) => *value = toml::Value::Float(*i as f64),
            (e, g) if type_name(e) == type_name(g) => {}
            (e, g) => {
                return Err(Error::config(
                    here,
                    format!("expected {}, found {}", type_name(e), type_name(g)),
                ))
            }
        }
    }
    Ok(())
}

fn parse_override(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_with(text, std::iter::empty::<(String, String)>())
    }

    /// Parses `text`, then applies `overrides` given as environment
    /// variables (`MATI_<SECTION>_<KEY>`); variables without the prefix are
    /// ignored.
    pub fn from_toml_with<K, V>(text: &str, overrides: impl IntoIterator<Item = (K, V)>) -> Result<Self>
    where
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::config("<file>", e.message()))?;
        for (name, raw) in overrides {
            let Some(rest) = name.as_ref().strip_prefix("MATI_") else { continue };
            let lower = rest.to_ascii_lowercase();
            let Some((section, key)) = lower.split_once('_') else {
                return Err(Error::config(name.as_ref(), "override must name a section and a key"));
            };
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let toml::Value::Table(sec) = entry else {
                return Err(Error::config(section, "not a section"));
            };
            sec.insert(key.to_string(), parse_override(raw.as_ref()));
        }
        let reference = match toml::Value::try_from(RunConfig::default()) {
            Ok(toml::Value::Table(t)) => t,
            _ => return Err(Error::Invariant("default config does not serialize".into())),
        };
        check_tree(&reference, &mut table, "")?;
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config("<file>", e.message()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and applies the process environment.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("<file>", format!("{}: {e}", path.display())))?;
        Self::from_toml_with(&text, std::env::vars())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// sha256 of the canonical serialization.
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }

    /// Seed for one pipeline stage: the first eight bytes of
    /// `sha256("<root>:<stage>")`.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        split_seed(self.run.seed, stage)
    }

    pub fn validate(&self) -> Result<()> {
        self.checkin_format()?;
        if self.factors.kinds.is_empty() {
            return Err(Error::config("factors.kinds", "at least one factor required"));
        }
        let s = &self.sampling;
        if s.m_min == 0 {
            return Err(Error::config("sampling.m_min", "must be at least 1"));
        }
        if !(s.n_percent > 0.0 && s.n_percent <= 100.0) {
            return Err(Error::config("sampling.n_percent", "must lie in (0, 100]"));
        }
        if s.strata_low >= s.strata_high {
            return Err(Error::config("sampling.strata_low", "must be below strata_high"));
        }
        for (key, t) in [("minute", self.hac.minute), ("hour", self.hac.hour), ("day", self.hac.day)] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::config(format!("hac.{key}"), "must lie in [0, 1]"));
            }
        }
        if self.mf.rank == 0 || !(self.mf.reg >= 0.0) {
            return Err(Error::config("mf.rank", "rank must be at least 1 and reg non-negative"));
        }
        self.model_set_config()?.validate()?;
        self.split_config().validate()?;
        if self.eval.ns.is_empty() || self.eval.ns.contains(&0) {
            return Err(Error::config("eval.ns", "need at least one N, all positive"));
        }
        if !(self.eval.tune_fraction > 0.0 && self.eval.tune_fraction <= 1.0) {
            return Err(Error::config("eval.tune_fraction", "must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn checkin_format(&self) -> Result<CheckInFormat> {
        CheckInFormat::from_order(&self.data.columns).map_err(|e| match e {
            Error::Config { message, .. } => Error::config("data.columns", message),
            other => other,
        })
    }

    pub fn factor_specs(&self) -> Vec<TemporalFactorSpec> {
        self.factors
            .kinds
            .iter()
            .map(|&k| TemporalFactorSpec::new(k, self.data.utc_offset_secs))
            .collect()
    }

    pub fn extract_config(&self) -> ExtractConfig {
        let s = &self.sampling;
        ExtractConfig {
            collect: CollectConfig {
                m_min: s.m_min,
                n_percent: s.n_percent,
                max_rounds: s.max_rounds,
                strata: (s.strata_low, s.strata_high),
                vector_mode: s.vector_mode,
            },
            completion: self.mf,
            thresholds: vec![
                ("minute".into(), self.hac.minute),
                ("hour".into(), self.hac.hour),
                ("day".into(), self.hac.day),
            ],
            default_threshold: ExtractConfig::default().default_threshold,
        }
    }

    pub fn model_set_config(&self) -> Result<ModelSetConfig> {
        let u = &self.univariate;
        let m = &self.mati;
        let weights = UsgWeights::new(self.usg.alpha, self.usg.beta).map_err(|e| match e {
            Error::Config { message, .. } => Error::config("usg.alpha", message),
            other => other,
        })?;
        Ok(ModelSetConfig {
            baseline: BaselineConfig {
                k_neighbors: self.usg.k_neighbors,
                geo: GeoConfig {
                    bin_km: self.usg.bin_km,
                    d_min_km: self.usg.d_min_km,
                },
                weights,
            },
            univariate: UnivariateConfig {
                t: u.t,
                lambda: u.lambda,
                theta: u.theta,
                xi: u.xi,
                k: u.k,
                min_users: u.min_users,
                min_pois: u.min_pois,
                utc_offset_secs: self.data.utc_offset_secs,
            },
            mati: MatiConfig {
                phi: m.phi_t,
                em: EmConfig {
                    max_iter: m.max_iter,
                    tol: m.tol,
                    gamma: m.gamma,
                },
                depth: m.depth,
            },
            hybrid: HybridConfig {
                psi_range: (self.hybrid.psi_range[0], self.hybrid.psi_range[1]),
                probe_n: (self.hybrid.probe_n > 0).then_some(self.hybrid.probe_n),
            },
        })
    }

    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            x: self.eval.x,
            test_fraction: self.eval.test_fraction,
        }
    }

    pub fn tune_split_config(&self) -> SplitConfig {
        SplitConfig {
            x: self.eval.x,
            test_fraction: self.eval.tune_fraction,
        }
    }
}

pub fn split_seed(root: u64, stage: &str) -> u64 {
    let digest = Sha256::digest(format!("{root}:{stage}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("eight bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[data]
checkins = "data/checkins.tsv"
utc_offset_secs = 3600

[usg]
alpha = 0.3
beta = 0.4

[mati]
phi_t = 1
"#;

    #[test]
    fn parses_and_widens_integers() {
        let c = RunConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(c.usg.alpha, 0.3);
        assert_eq!(c.mati.phi_t, 1.0);
        assert_eq!(c.data.utc_offset_secs, 3600);
        assert_eq!(c.factor_specs()[0].utc_offset_secs, 3600);
        assert_eq!(c.eval.ns, vec![5, 10, 20]);
    }

    #[test]
    fn round_trip_is_idempotent() {
        let c = RunConfig::from_toml_str(SAMPLE).unwrap();
        let again = RunConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_toml_string(), c.to_toml_string());
        assert_eq!(again.sha256(), c.sha256());
    }

    #[test]
    fn unknown_and_mistyped_keys_name_their_path() {
        let err = RunConfig::from_toml_str("[usg]\ngamma = 1.0\n").unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "usg.gamma"), "{err}");
        let err = RunConfig::from_toml_str("[bogus]\nx = 1\n").unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "bogus"));
        let err = RunConfig::from_toml_str("[mati]\nphi_t = \"high\"\n").unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "mati.phi_t"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn bounds_are_checked() {
        assert!(RunConfig::from_toml_str("[usg]\nalpha = 0.8\nbeta = 0.5\n").is_err());
        assert!(RunConfig::from_toml_str("[mati]\nphi_t = 1.5\n").is_err());
        assert!(RunConfig::from_toml_str("[eval]\nx = 0.0\n").is_err());
        assert!(RunConfig::from_toml_str("[data]\ncolumns = \"user,poi\"\n").is_err());
    }

    #[test]
    fn environment_overrides() {
        let env = [
            ("MATI_MATI_PHI_T", "0.4"),
            ("MATI_EVAL_NS", "[5, 10]"),
            ("MATI_DATA_CHECKINS", "other.tsv"),
            ("PATH", "/bin"),
        ];
        let c = RunConfig::from_toml_with(SAMPLE, env).unwrap();
        assert_eq!(c.mati.phi_t, 0.4);
        assert_eq!(c.eval.ns, vec![5, 10]);
        assert_eq!(c.data.checkins, PathBuf::from("other.tsv"));
        let err = RunConfig::from_toml_with(SAMPLE, [("MATI_USG_BOGUS", "1")]).unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "usg.bogus"));
    }

    #[test]
    fn stage_seeds_are_stable_and_distinct() {
        let c = RunConfig::default();
        assert_eq!(c.stage_seed("split"), split_seed(42, "split"));
        assert_ne!(c.stage_seed("split"), c.stage_seed("sampling"));
        assert_ne!(split_seed(1, "split"), split_seed(2, "split"));
    }
}
