mod common;

use std::collections::BTreeSet;

use common::{checkin, MONDAY};
use mati::ingest::{CheckInLog, SocialEdges};
use mati::sampling::{sample_round, stratify_users, SamplingState};
use mati::slabs::{
    aggregate_similarity, complete_linkage, complete_matrix, complete_symmetric, cross_slabs, user_slot_vectors,
    CompletionConfig, SlabProfile, VectorMode,
};
use mati::slabs::similarity::SimilaritySamples;
use mati::temporal::TemporalFactorSpec;
use proptest::prelude::*;

fn sym_matrix(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, n * (n - 1) / 2).prop_map(move |upper| {
        let mut m = vec![1.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                m[i * n + j] = upper[k];
                m[j * n + i] = upper[k];
                k += 1;
            }
        }
        m
    })
}

fn partition(n: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
    prop::collection::vec(0..n, n).prop_map(move |labels| {
        let mut groups = vec![Vec::new(); n];
        for (s, &l) in labels.iter().enumerate() {
            groups[l].push(s);
        }
        groups.retain(|g: &Vec<usize>| !g.is_empty());
        groups
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn complete_linkage_guarantee((n, m) in (2usize..=24).prop_flat_map(|n| (Just(n), sym_matrix(n))), theta in 0.0f64..1.0) {
        let c = complete_linkage(&m, n, theta);
        for cl in &c.clusters {
            for &a in cl {
                for &b in cl {
                    prop_assert!(m[a * n + b] >= theta);
                }
            }
        }
        // No two remaining clusters could still be merged.
        for (i, a) in c.clusters.iter().enumerate() {
            for b in &c.clusters[i + 1..] {
                let link = a.iter().flat_map(|&x| b.iter().map(|&y| (x, y)).collect::<Vec<_>>()).map(|(x, y)| m[x * n + y]).fold(f64::INFINITY, f64::min);
                prop_assert!(link < theta);
            }
        }
        let all: BTreeSet<usize> = c.clusters.iter().flatten().copied().collect();
        prop_assert_eq!(all.len(), n);
    }

    #[test]
    fn slabs_partition_time(hours in partition(24), days in partition(7), stamps in prop::collection::vec(0i64..2_000_000_000, 1..200)) {
        let index = cross_slabs(
            vec![
                (TemporalFactorSpec::day_of_week(0), days.clone()),
                (TemporalFactorSpec::hour_of_day(0), hours.clone()),
            ],
            Vec::new(),
        ).unwrap();
        prop_assert_eq!(index.n_slabs(), hours.len() * days.len());
        let h = TemporalFactorSpec::hour_of_day(0);
        let d = TemporalFactorSpec::day_of_week(0);
        for ts in stamps {
            let z = index.slab_of(ts);
            let matches = (0..index.n_slabs()).filter(|&y| {
                let p = index.parts(y);
                index.uni[0][p[0]].slots.contains(&h.slot_of(ts)) && index.uni[1][p[1]].slots.contains(&d.slot_of(ts))
            }).collect::<Vec<_>>();
            prop_assert_eq!(matches, vec![z]);
            // Same hour slot and day slot a week later: same slab.
            prop_assert_eq!(index.slab_of(ts + 7 * 86_400), z);
        }
    }

    #[test]
    fn completion_keeps_observed_cells(m in sym_matrix(7), mask in prop::collection::vec(any::<bool>(), 21)) {
        let mut samples = SimilaritySamples::new(TemporalFactorSpec::day_of_week(0));
        let mut k = 0;
        for a in 0..7 {
            for b in a + 1..7 {
                if mask[k] {
                    samples.add(a, b, m[a * 7 + b]);
                }
                k += 1;
            }
        }
        let raw = aggregate_similarity(&samples, 1);
        let cfg = CompletionConfig { rank: 1, ..Default::default() };
        if let Ok(c) = complete_matrix(&raw, &cfg) {
            for a in 0..7 {
                prop_assert_eq!(c.get(a, a), 1.0);
                for b in 0..7 {
                    prop_assert_eq!(c.get(a, b), c.get(b, a));
                    prop_assert!((0.0..=1.0).contains(&c.get(a, b)));
                    if raw.is_observed(a, b) {
                        prop_assert_eq!(c.get(a, b), raw.get(a, b));
                    }
                }
            }
            prop_assert!(c.is_complete());
        }
    }

    #[test]
    fn merged_slabs_preserve_counts(hours in partition(24), offsets in prop::collection::vec(0i64..86_400 * 28, 1..100)) {
        let log = CheckInLog::new(
            offsets.iter().map(|&o| checkin("u", "p", MONDAY + o, 0.0, 0.0)).collect(),
            SocialEdges::default(),
        );
        let factor = TemporalFactorSpec::hour_of_day(0);
        let per_slot = user_slot_vectors(log.history(0), &factor, VectorMode::Counts);
        let index = cross_slabs(vec![(factor, hours)], Vec::new()).unwrap();
        let profile = SlabProfile::from_checkins(&index, log.history(0));
        prop_assert_eq!(profile.total() as usize, offsets.len());
        for &(z, count) in &profile.counts {
            let slot_sum: f64 = index.uni[0][index.parts(z)[0]].slots.iter()
                .map(|&s| per_slot[s].values().sum::<f64>())
                .sum();
            prop_assert_eq!(count as f64, slot_sum);
        }
    }

    #[test]
    fn rank_one_hidden_entry(v in prop::collection::vec(0.3f64..1.0, 6..12), pick in any::<prop::sample::Index>()) {
        let n = v.len();
        let full: Vec<f64> = (0..n * n).map(|k| v[k / n] * v[k % n]).collect();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let (i, j) = pairs[pick.index(pairs.len())];
        let mut observed = vec![true; n * n];
        observed[i * n + j] = false;
        observed[j * n + i] = false;
        let cfg = CompletionConfig { rank: 1, reg: 0.0, max_sweeps: 20_000, tol: 1e-16 };
        let fit = complete_symmetric(&full, &observed, n, &cfg).unwrap();
        prop_assert!((fit[i * n + j] - full[i * n + j]).abs() < 1e-6);
    }

    #[test]
    fn sampling_never_repeats(counts in prop::collection::vec(1usize..25, 3..40), pct in 1.0f64..60.0, seed in any::<u64>()) {
        let recs = counts.iter().enumerate().flat_map(|(u, &n)| {
            (0..n).map(move |p| checkin(&format!("u{u:03}"), &format!("p{p:02}"), MONDAY + p as i64, 0.0, 0.0))
        }).collect();
        let log = CheckInLog::new(recs, SocialEdges::default());
        let strata = stratify_users(&log, (5, 15));
        let mut state = SamplingState::new(seed);
        let mut drawn = Vec::new();
        loop {
            let pending: Vec<bool> = strata.all().iter()
                .map(|s| s.iter().any(|u| !state.drawn.contains(u)))
                .collect();
            let round = sample_round(&strata, &mut state, pct);
            if round.is_empty() {
                break;
            }
            // Every stratum with users left contributes to the round.
            for (s, &open) in strata.all().iter().zip(&pending) {
                prop_assert_eq!(round.iter().any(|u| s.contains(u)), open);
            }
            drawn.extend(round);
        }
        let unique: BTreeSet<usize> = drawn.iter().copied().collect();
        prop_assert_eq!(unique.len(), drawn.len());
        prop_assert_eq!(drawn.len(), log.n_users());
        prop_assert_eq!(state.drawn.len(), drawn.len());

        let mut again = SamplingState::new(seed);
        let mut replay = Vec::new();
        while replay.len() < drawn.len() {
            replay.extend(sample_round(&strata, &mut again, pct));
        }
        prop_assert_eq!(replay, drawn);
    }
}
