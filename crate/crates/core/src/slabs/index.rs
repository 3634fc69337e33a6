//! Uni-aspect and multi-aspect temporal slabs, the timestamp → slab mapping
//! and per-entity slab profiles.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::{CheckIn, CheckInLog, PoiIx, UserIx};
use crate::slabs::similarity::SlotSimilarityMatrix;
use crate::temporal::{order_by_tsp, TemporalFactorSpec};

pub const SLAB_INDEX_FORMAT: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniAspectSlab {
    pub factor: String,
    pub id: usize,
    pub slots: Vec<usize>,
}

/// One element of the cross product of uni-aspect slabs. `parts[k]` is the
/// uni-aspect slab id within factor `k` (factors ordered finest first).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiAspectSlab {
    pub id: usize,
    pub parts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlabIndex {
    pub format_version: u32,
    pub factors: Vec<TemporalFactorSpec>,
    pub uni: Vec<Vec<UniAspectSlab>>,
    pub matrices: Vec<SlotSimilarityMatrix>,
    pub multi: Vec<MultiAspectSlab>,
    /// Checksum of the check-in data the index was extracted from, if any.
    pub data_checksum: Option<String>,
    /// Checksum over factors and memberships, verified on load.
    pub checksum: String,
    #[serde(skip)]
    slot_to_uni: Vec<Vec<usize>>,
}

fn validate_partition(factor: &TemporalFactorSpec, slabs: &[Vec<usize>]) -> Result<()> {
    let n = factor.slot_count();
    let mut seen = vec![false; n];
    for slab in slabs {
        if slab.is_empty() {
            return Err(Error::invalid(format!("empty slab in factor `{}`", factor.name)));
        }
        for &s in slab {
            if s >= n || seen[s] {
                return Err(Error::invalid(format!(
                    "slabs of factor `{}` do not partition its slots",
                    factor.name
                )));
            }
            seen[s] = true;
        }
    }
    if seen.iter().any(|&v| !v) {
        return Err(Error::invalid(format!(
            "slabs of factor `{}` do not cover all slots",
            factor.name
        )));
    }
    Ok(())
}

/// Full Cartesian product of per-factor slab partitions. Factors are put in
/// TSP order (finest first) and multi-aspect ids enumerate the part tuples
/// lexicographically in that order.
pub fn cross_slabs(
    per_factor: Vec<(TemporalFactorSpec, Vec<Vec<usize>>)>,
    matrices: Vec<SlotSimilarityMatrix>,
) -> Result<SlabIndex> {
    if per_factor.is_empty() {
        return Err(Error::invalid("empty factor set"));
    }
    let factors = order_by_tsp(per_factor.iter().map(|(f, _)| f.clone()).collect())?;
    let mut uni = Vec::with_capacity(factors.len());
    for f in &factors {
        let (_, slabs) = per_factor
            .iter()
            .find(|(g, _)| g.tsp_rank == f.tsp_rank)
            .expect("factor present");
        validate_partition(f, slabs)?;
        let mut slabs: Vec<Vec<usize>> = slabs
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.sort_unstable();
                s
            })
            .collect();
        slabs.sort_by_key(|s| s[0]);
        uni.push(
            slabs
                .into_iter()
                .enumerate()
                .map(|(id, slots)| UniAspectSlab {
                    factor: f.name.clone(),
                    id,
                    slots,
                })
                .collect::<Vec<_>>(),
        );
    }
    let counts: Vec<usize> = uni.iter().map(Vec::len).collect();
    let total: usize = counts.iter().product();
    let multi = (0..total)
        .map(|id| MultiAspectSlab {
            id,
            parts: decode_parts(id, &counts),
        })
        .collect();
    let mut matrices = matrices;
    matrices.sort_by_key(|m| m.factor.tsp_rank);
    let mut index = SlabIndex {
        format_version: SLAB_INDEX_FORMAT,
        factors,
        uni,
        matrices,
        multi,
        data_checksum: None,
        checksum: String::new(),
        slot_to_uni: Vec::new(),
    };
    index.rebuild_lookup();
    index.checksum = index.compute_checksum();
    Ok(index)
}

fn decode_parts(mut id: usize, counts: &[usize]) -> Vec<usize> {
    let mut parts = vec![0; counts.len()];
    for k in (0..counts.len()).rev() {
        parts[k] = id % counts[k];
        id /= counts[k];
    }
    parts
}

impl SlabIndex {
    /// A single-slab index over one factor, useful as a degenerate baseline.
    pub fn trivial(factor: TemporalFactorSpec) -> Self {
        let all = (0..factor.slot_count()).collect();
        cross_slabs(vec![(factor, vec![all])], Vec::new()).expect("valid trivial partition")
    }

    fn rebuild_lookup(&mut self) {
        self.slot_to_uni = self
            .factors
            .iter()
            .zip(&self.uni)
            .map(|(f, slabs)| {
                let mut map = vec![0; f.slot_count()];
                for slab in slabs {
                    for &s in &slab.slots {
                        map[s] = slab.id;
                    }
                }
                map
            })
            .collect();
    }

    fn compute_checksum(&self) -> String {
        let structural = serde_json::json!({
            "format_version": self.format_version,
            "factors": self.factors,
            "uni": self.uni,
        });
        hex::encode(Sha256::digest(structural.to_string().as_bytes()))
    }

    pub fn with_data_checksum(mut self, checksum: impl Into<String>) -> Self {
        self.data_checksum = Some(checksum.into());
        self
    }

    pub fn n_slabs(&self) -> usize {
        self.multi.len()
    }

    /// Number of uni-aspect slabs per factor, finest first.
    pub fn slab_counts(&self) -> Vec<usize> {
        self.uni.iter().map(Vec::len).collect()
    }

    pub fn uni_slab_of(&self, factor: usize, timestamp: i64) -> usize {
        self.slot_to_uni[factor][self.factors[factor].slot_of(timestamp)]
    }

    pub fn slab_of(&self, timestamp: i64) -> usize {
        let mut id = 0;
        for (k, slabs) in self.uni.iter().enumerate() {
            id = id * slabs.len() + self.uni_slab_of(k, timestamp);
        }
        id
    }

    pub fn parts(&self, slab: usize) -> &[usize] {
        &self.multi[slab].parts
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("slab index serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut index: SlabIndex = serde_json::from_str(text)?;
        if index.format_version != SLAB_INDEX_FORMAT {
            return Err(Error::invalid(format!(
                "unsupported slab index format {}",
                index.format_version
            )));
        }
        index.rebuild_lookup();
        let expected = index.compute_checksum();
        if expected != index.checksum {
            return Err(Error::Stale("slab index checksum does not match its contents".into()));
        }
        Ok(index)
    }
}

/// Per-entity check-in counts over multi-aspect slabs, sorted by slab id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlabProfile {
    pub counts: Vec<(usize, u32)>,
}

impl SlabProfile {
    pub fn from_checkins<'a>(index: &SlabIndex, checkins: impl IntoIterator<Item = &'a CheckIn>) -> Self {
        let mut dense = vec![0u32; index.n_slabs()];
        for c in checkins {
            dense[index.slab_of(c.timestamp)] += 1;
        }
        SlabProfile {
            counts: dense
                .into_iter()
                .enumerate()
                .filter(|&(_, c)| c > 0)
                .collect(),
        }
    }

    pub fn slab_set(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts.iter().map(|&(s, _)| s)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().map(|&(_, c)| c).sum()
    }

    pub fn contains(&self, slab: usize) -> bool {
        self.counts.binary_search_by_key(&slab, |&(s, _)| s).is_ok()
    }
}

pub enum Entity<'a> {
    User(&'a str),
    Poi(&'a str),
}

pub fn entity_slab_profile(log: &CheckInLog, entity: Entity<'_>, index: &SlabIndex) -> Result<SlabProfile> {
    match entity {
        Entity::User(id) => {
            let u = log
                .user_index(id)
                .ok_or_else(|| Error::invalid(format!("unknown user `{id}`")))?;
            Ok(SlabProfile::from_checkins(index, log.history(u)))
        }
        Entity::Poi(id) => {
            let p = log
                .poi_index(id)
                .ok_or_else(|| Error::invalid(format!("unknown POI `{id}`")))?;
            Ok(SlabProfile::from_checkins(index, log.poi_checkins(p)))
        }
    }
}

/// Slab profiles of every user and POI of a dataset view.
#[derive(Clone, Debug, PartialEq)]
pub struct SlabProfiles {
    pub users: Vec<SlabProfile>,
    pub pois: Vec<SlabProfile>,
}

impl SlabProfiles {
    pub fn build(log: &CheckInLog, index: &SlabIndex) -> Self {
        let users = (0..log.n_users())
            .map(|u| SlabProfile::from_checkins(index, log.history(u)))
            .collect();
        let pois = (0..log.n_pois())
            .map(|p| SlabProfile::from_checkins(index, log.poi_checkins(p)))
            .collect();
        SlabProfiles { users, pois }
    }

    pub fn user(&self, u: UserIx) -> &SlabProfile {
        &self.users[u]
    }

    pub fn poi(&self, p: PoiIx) -> &SlabProfile {
        &self.pois[p]
    }
}
