mod common;

use common::*;
use mati::config::RunConfig;
use mati::evaluation::{evaluate, f1_score, metrics_at_n, split_exclude, Fingerprint, SplitConfig};
use mati::pipeline::{Model, ModelSet, ModelSetConfig};
use mati::slabs::cross_slabs;
use mati::temporal::TemporalFactorSpec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn metrics_match_set_counting(
        (recommended, n) in prop::collection::btree_set(0usize..40, 0..20)
            .prop_flat_map(|s| { let len = s.len(); (Just(s.into_iter().collect::<Vec<_>>()), len.max(1)..25) }),
        excluded in prop::collection::btree_set(0usize..40, 1..15),
    ) {
        let mut recommended = recommended;
        // Recommendation order is arbitrary.
        recommended.reverse();
        let excluded: Vec<usize> = excluded.into_iter().collect();
        let m = metrics_at_n(&recommended, &excluded, n);
        let (hits, p, r) = brute_metrics(&recommended, &excluded, n);
        prop_assert_eq!(m.hits, hits);
        prop_assert_eq!(m.precision, p);
        prop_assert_eq!(m.recall, r);
        prop_assert!(m.precision <= 1.0 && m.recall <= 1.0);
        prop_assert!(m.f1 >= 0.0 && m.f1 <= m.precision.max(m.recall) + 1e-15);
        prop_assert_eq!(m.f1, f1_score(p, r));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn failure_rate_falls_with_n_and_reports_repeat(seed in any::<u64>()) {
        let log = random_log(&mut ChaCha8Rng::seed_from_u64(seed), 16, 30, 14);
        let index = cross_slabs(
            vec![
                (TemporalFactorSpec::hour_of_day(0), vec![(0..12).collect(), (12..24).collect()]),
                (TemporalFactorSpec::day_of_week(0), vec![vec![0, 1, 2, 3, 4], vec![5, 6]]),
            ],
            Vec::new(),
        ).unwrap();
        let run = || -> Option<String> {
            let split = split_exclude(&log, &SplitConfig { x: 0.3, test_fraction: 0.5 }, seed).ok()?;
            let set = ModelSet::train(split.train.clone(), index.clone(), ModelSetConfig::default()).ok()?;
            let report = evaluate(&set, &split, &Model::ALL, &[5, 10, 20], Fingerprint::default()).ok()?;
            for m in &report.models {
                for w in m.at.windows(2) {
                    assert!(w[1].failure_rate <= w[0].failure_rate, "{:?}", m);
                }
            }
            Some(report.to_json() + &report.rows_csv())
        };
        let (a, b) = (run(), run());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn config_round_trip(
        seed in 0u64..i64::MAX as u64,
        phi in 0.0f64..=1.0,
        alpha in 0.0f64..0.4,
        beta in 0.0f64..0.4,
        ns in prop::collection::vec(1usize..50, 1..5),
        probe in 0usize..30,
    ) {
        let mut cfg = RunConfig::default();
        cfg.run.seed = seed;
        cfg.mati.phi_t = phi;
        cfg.usg.alpha = alpha;
        cfg.usg.beta = beta;
        cfg.eval.ns = ns;
        cfg.hybrid.probe_n = probe;
        let text = cfg.to_toml_string();
        let parsed = RunConfig::from_toml_str(&text).unwrap();
        prop_assert_eq!(&parsed, &cfg);
        prop_assert_eq!(parsed.to_toml_string(), text);
        prop_assert_eq!(parsed.sha256(), cfg.sha256());
    }
}
