//! Non-replacement stratified sampling of users for slot-similarity
//! estimation.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ingest::{CheckInLog, UserIx};
use crate::slabs::similarity::{user_slot_vectors, SimilaritySamples, VectorMode};
use crate::temporal::TemporalFactorSpec;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UserStrata {
    pub passive: Vec<UserIx>,
    pub semi_active: Vec<UserIx>,
    pub active: Vec<UserIx>,
}

impl UserStrata {
    pub fn all(&self) -> [&[UserIx]; 3] {
        [&self.passive, &self.semi_active, &self.active]
    }
}

/// Splits users by distinct-POI count: `< low`, `[low, high)`, `>= high`.
pub fn stratify_users(log: &CheckInLog, thresholds: (usize, usize)) -> UserStrata {
    let (low, high) = thresholds;
    assert!(low < high, "stratum thresholds must satisfy low < high");
    let mut strata = UserStrata::default();
    for u in 0..log.n_users() {
        let n = log.distinct_pois(u).len();
        if n < low {
            strata.passive.push(u);
        } else if n < high {
            strata.semi_active.push(u);
        } else {
            strata.active.push(u);
        }
    }
    strata
}

#[derive(Clone, Debug)]
pub struct SamplingState {
    pub drawn: BTreeSet<UserIx>,
    pub round: usize,
    rng: ChaCha8Rng,
}

impl SamplingState {
    pub fn new(seed: u64) -> Self {
        SamplingState {
            drawn: BTreeSet::new(),
            round: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

/// Draws `ceil(n_percent% of the remaining users)` from every non-exhausted
/// stratum, uniformly and without replacement. Returned ids are sorted by
/// stratum, then in draw order.
pub fn sample_round(strata: &UserStrata, state: &mut SamplingState, n_percent: f64) -> Vec<UserIx> {
    assert!(
        n_percent > 0.0 && n_percent <= 100.0,
        "n_percent must lie in (0, 100]"
    );
    let mut out = Vec::new();
    for stratum in strata.all() {
        let remaining: Vec<UserIx> = stratum
            .iter()
            .copied()
            .filter(|u| !state.drawn.contains(u))
            .collect();
        if remaining.is_empty() {
            continue;
        }
        let k = ((remaining.len() as f64 * n_percent / 100.0).ceil() as usize).min(remaining.len());
        let picked: Vec<UserIx> = remaining.choose_multiple(&mut state.rng, k).copied().collect();
        state.drawn.extend(&picked);
        out.extend(picked);
    }
    state.round += 1;
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageReport {
    pub rounds: usize,
    pub users_sampled: usize,
    /// `(factor, slot_a, slot_b, sample_count)` for every pair under `m_min`.
    pub under_sampled: Vec<(String, usize, usize, u32)>,
}

impl CoverageReport {
    pub fn is_complete(&self) -> bool {
        self.under_sampled.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct CollectConfig {
    pub m_min: u32,
    pub n_percent: f64,
    pub max_rounds: usize,
    pub strata: (usize, usize),
    pub vector_mode: VectorMode,
}

impl Default for CollectConfig {
    fn default() -> Self {
        CollectConfig {
            m_min: 30,
            n_percent: 5.0,
            max_rounds: 1000,
            strata: (5, 15),
            vector_mode: VectorMode::Counts,
        }
    }
}

/// All slot pairs of every factor, with their sample counts, as CSV.
pub fn coverage_csv(samples: &[SimilaritySamples]) -> String {
    let mut out = String::from("factor,slot_a,slot_b,sample_count\n");
    for s in samples {
        for a in 0..s.slot_count() {
            for b in a + 1..s.slot_count() {
                out.push_str(&format!("{},{},{},{}\n", s.factor.name, a, b, s.count(a, b)));
            }
        }
    }
    out
}

/// Repeats sampling rounds, adding each drawn user's slot-pair similarities,
/// until every slot pair of every factor has at least `m_min` samples, the
/// users run out, or `max_rounds` is reached. Under-coverage is reported,
/// not treated as an error.
pub fn collect_until(
    log: &CheckInLog,
    factors: &[TemporalFactorSpec],
    cfg: &CollectConfig,
    seed: u64,
) -> (Vec<SimilaritySamples>, CoverageReport) {
    let strata = stratify_users(log, cfg.strata);
    let mut state = SamplingState::new(seed);
    let mut samples: Vec<SimilaritySamples> =
        factors.iter().cloned().map(SimilaritySamples::new).collect();
    let covered = |samples: &[SimilaritySamples]| {
        samples.iter().all(|s| s.under_sampled(cfg.m_min).is_empty())
    };
    while state.round < cfg.max_rounds && !covered(&samples) {
        let drawn = sample_round(&strata, &mut state, cfg.n_percent);
        if drawn.is_empty() {
            break;
        }
        for u in drawn {
            for s in samples.iter_mut() {
                let vectors = user_slot_vectors(log.history(u), &s.factor, cfg.vector_mode);
                s.add_user(&vectors);
            }
        }
    }
    let under_sampled = samples
        .iter()
        .flat_map(|s| {
            s.under_sampled(cfg.m_min)
                .into_iter()
                .map(|(a, b, c)| (s.factor.name.clone(), a, b, c))
        })
        .collect();
    let report = CoverageReport {
        rounds: state.round,
        users_sampled: state.drawn.len(),
        under_sampled,
    };
    (samples, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{RawCheckIn, SocialEdges};

    fn log_with_counts(counts: &[usize]) -> CheckInLog {
        let mut recs = Vec::new();
        for (u, &n) in counts.iter().enumerate() {
            for p in 0..n {
                recs.push(RawCheckIn {
                    user_id: format!("u{u:04}"),
                    poi_id: format!("p{p:03}"),
                    timestamp: 1_000_000 + (p as i64) * 3600,
                    lat: 0.0,
                    lon: 0.0,
                });
            }
        }
        CheckInLog::new(recs, SocialEdges::default())
    }

    #[test]
    fn strata_boundaries() {
        let log = log_with_counts(&[3, 5, 14, 15, 20]);
        let s = stratify_users(&log, (5, 15));
        assert_eq!(s.passive, vec![0]);
        assert_eq!(s.semi_active, vec![1, 2]);
        assert_eq!(s.active, vec![3, 4]);

        let uniform = stratify_users(&log_with_counts(&[7, 7, 7]), (5, 15));
        assert_eq!(uniform.semi_active.len(), 3);
        assert!(uniform.passive.is_empty() && uniform.active.is_empty());
    }

    #[test]
    fn rounds_draw_per_stratum_without_replacement() {
        let strata = UserStrata {
            passive: (0..100).collect(),
            semi_active: (100..200).collect(),
            active: (200..300).collect(),
        };
        let mut state = SamplingState::new(7);
        let first = sample_round(&strata, &mut state, 10.0);
        assert_eq!(first.len(), 30);
        for range in [0..100, 100..200, 200..300] {
            assert_eq!(first.iter().filter(|&&u| range.contains(&u)).count(), 10);
        }
        let second = sample_round(&strata, &mut state, 10.0);
        assert!(second.iter().all(|u| !first.contains(u)));
        assert_eq!(state.drawn.len(), first.len() + second.len());

        let mut again = SamplingState::new(7);
        assert_eq!(sample_round(&strata, &mut again, 10.0), first);
    }

    #[test]
    fn exhausted_strata_return_empty() {
        let strata = UserStrata {
            passive: vec![0, 1],
            ..Default::default()
        };
        let mut state = SamplingState::new(1);
        assert_eq!(sample_round(&strata, &mut state, 100.0).len(), 2);
        assert!(sample_round(&strata, &mut state, 100.0).is_empty());
    }

    #[test]
    fn every_slot_visited_covers_in_one_round() {
        // Each user visits the same POI at every hour of the day.
        let mut recs = Vec::new();
        for u in 0..3 {
            for h in 0..24 {
                recs.push(RawCheckIn {
                    user_id: format!("u{u}"),
                    poi_id: "p".into(),
                    timestamp: 86_400 * 4 + h * 3600,
                    lat: 0.0,
                    lon: 0.0,
                });
            }
        }
        let log = CheckInLog::new(recs, SocialEdges::default());
        let cfg = CollectConfig {
            m_min: 1,
            n_percent: 100.0,
            ..Default::default()
        };
        let (samples, report) = collect_until(&log, &[TemporalFactorSpec::hour_of_day(0)], &cfg, 3);
        assert!(report.is_complete());
        assert_eq!(report.rounds, 1);
        assert_eq!(samples[0].count(0, 23), 3);
    }

    #[test]
    fn missing_slot_is_flagged() {
        let mut recs = Vec::new();
        for u in 0..5 {
            for d in [0i64, 1, 2, 4, 5, 6] {
                // Monday 1970-01-05 is day 4 after epoch.
                recs.push(RawCheckIn {
                    user_id: format!("u{u}"),
                    poi_id: format!("p{d}"),
                    timestamp: 86_400 * (4 + d) + 3600,
                    lat: 0.0,
                    lon: 0.0,
                });
            }
        }
        let log = CheckInLog::new(recs, SocialEdges::default());
        let cfg = CollectConfig {
            m_min: 1,
            n_percent: 50.0,
            ..Default::default()
        };
        let (_, report) = collect_until(&log, &[TemporalFactorSpec::day_of_week(0)], &cfg, 3);
        assert_eq!(report.users_sampled, 5);
        let flagged: Vec<(usize, usize)> =
            report.under_sampled.iter().map(|(_, a, b, _)| (*a, *b)).collect();
        assert_eq!(flagged, vec![(0, 3), (1, 3), (2, 3), (3, 4), (3, 5), (3, 6)]);
    }
}
