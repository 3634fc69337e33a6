mod common;

use common::*;
use mati::baselines::{max_normalize, recommend_top_n, ubcf_score, BaselineConfig, Components, UserPoiMatrix, UsgModel, UsgWeights};
use mati::hybrid::{decide, HybridConfig, Path};
use mati::mati::{chain_distribution, e_step, joint_prob, m_step, ChainLayout, MatiComponents, ObservedPair};
use mati::pipeline::{Model, ModelSet, ModelSetConfig};
use mati::slabs::{cross_slabs, SlabIndex};
use mati::temporal::TemporalFactorSpec;
use mati::univariate::{
    absolute_user_act, effective_user_act, effective_user_act_from, m_avg_quotas, poi_act, user_poi_probs,
    user_poi_counts, CStarSource, UnivariateConfig,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn layout_of(counts: &[usize]) -> ChainLayout {
    let names = ["hour", "day"][..counts.len()].iter().map(|s| s.to_string()).collect();
    ChainLayout::new(names, counts.to_vec()).unwrap()
}

fn two_factor_index(seed: u64) -> SlabIndex {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    use rand::Rng;
    let hours: Vec<Vec<usize>> = {
        let k = rng.random_range(1..=4);
        let cut: usize = 24 / k;
        (0..k).map(|i| (i * cut..if i + 1 == k { 24 } else { (i + 1) * cut }).collect()).collect()
    };
    let weekend = rng.random_bool(0.5);
    let days = if weekend { vec![vec![0, 1, 2, 3, 4], vec![5, 6]] } else { vec![(0..7).collect()] };
    cross_slabs(
        vec![(TemporalFactorSpec::hour_of_day(0), hours), (TemporalFactorSpec::day_of_week(0), days)],
        Vec::new(),
    )
    .unwrap()
}

fn small_set(seed: u64, index: Option<SlabIndex>, cfg: ModelSetConfig) -> Option<ModelSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log = random_log(&mut rng, 12, 25, 15);
    let index = index.unwrap_or_else(|| two_factor_index(seed));
    ModelSet::train(log, index, cfg).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn em_matches_brute_force(seed in any::<u64>()) {
        let inst = random_em_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let layout = layout_of(&inst.counts);
        for (nu, t) in inst.pr_nu.iter().zip(&inst.tables) {
            for z in 0..n_slabs(&inst.counts) {
                prop_assert!((joint_prob(&layout, *nu, t, z) - brute_joint_log(&inst.counts, *nu, t, z)).abs() <= 1e-12);
            }
            // The chained tables define a distribution.
            prop_assert!((chain_distribution(&layout, t).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        let resp = e_step(&layout, &inst.pr_nu, &inst.tables).unwrap();
        for (r, (nu, t)) in resp.iter().zip(inst.pr_nu.iter().zip(&inst.tables)) {
            for (a, b) in r.iter().zip(brute_posterior(&inst.counts, *nu, t)) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
        let evidence: Vec<ObservedPair> = inst.evidence.iter().map(|c| ObservedPair {
            user: 0, poi: 0, total: c.iter().sum(), counts: c.clone(),
        }).collect();
        for ev in [None, Some(evidence.as_slice())] {
            let (tables, _) = m_step(&layout, &inst.resp, ev, inst.gamma);
            for (i, t) in tables.iter().enumerate() {
                let want = match ev {
                    Some(_) => brute_m_step(&inst.counts, &inst.resp[i], &inst.evidence[i], inst.gamma),
                    None => brute_conditionals(&inst.counts, &inst.resp[i]),
                };
                for (a, b) in t.iter().zip(&want) {
                    prop_assert!((a - b).abs() <= 1e-12);
                }
                // Rows of every level sum to one.
                for k in 0..inst.counts.len() {
                    let parents: usize = inst.counts[k + 1..].iter().product();
                    for parent in 0..parents {
                        let s: f64 = (0..inst.counts[k]).map(|zk| {
                            let mut d = vec![0; inst.counts.len()];
                            let mut rest = parent;
                            for j in (k + 1..inst.counts.len()).rev() {
                                d[j] = rest % inst.counts[j];
                                rest /= inst.counts[j];
                            }
                            d[k] = zk;
                            t[flat_entry(&inst.counts, k, &d)]
                        }).sum();
                        prop_assert!((s - 1.0).abs() <= 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn ubcf_matches_brute_force(seed in any::<u64>(), k in 1usize..8) {
        let log = random_log(&mut ChaCha8Rng::seed_from_u64(seed), 8, 10, 6);
        let m = UserPoiMatrix::from_log(&log);
        for u in 0..m.n_users() {
            for l in 0..m.n_pois() {
                prop_assert!((ubcf_score(&m, u, l, k) - brute_ubcf(&m, u, l, k)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn usg_scores_are_bounded(seed in any::<u64>()) {
        let log = random_log(&mut ChaCha8Rng::seed_from_u64(seed), 10, 20, 10);
        let Ok(usg) = UsgModel::fit(&log, BaselineConfig::default()) else { return Ok(()) };
        for u in 0..log.n_users() {
            let h = usg.history(u);
            let c = usg.components(u, &h);
            for v in c.ubcf.iter().chain(&c.social).chain(&c.geo).chain(&usg.scores(u, &h, &UsgWeights::default())) {
                prop_assert!((0.0..=1.0).contains(v));
            }
        }
    }

    #[test]
    fn component_scaling_keeps_ranking(
        raw in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 2..30),
        exp in -10i32..10,
        which in 0usize..3,
    ) {
        let c = 2f64.powi(exp);
        let n = raw.len();
        let mask = vec![true; n];
        let build = |scale: [f64; 3]| {
            let mut comp = Components {
                ubcf: raw.iter().map(|r| r.0 * scale[0]).collect(),
                social: raw.iter().map(|r| r.1 * scale[1]).collect(),
                geo: raw.iter().map(|r| r.2 * scale[2]).collect(),
            };
            max_normalize(&mut comp.ubcf, &mask);
            max_normalize(&mut comp.social, &mask);
            max_normalize(&mut comp.geo, &mask);
            recommend_top_n(&comp.mix(&UsgWeights::default()), &[], n).unwrap().items
        };
        let mut scale = [1.0; 3];
        scale[which] = c;
        prop_assert_eq!(build([1.0; 3]), build(scale));

        let mati = |ps: f64, ds: f64| {
            let m = MatiComponents {
                psi: raw.iter().map(|r| r.0 * ps).collect(),
                depth: raw.iter().map(|r| r.1 * ds).collect(),
            };
            recommend_top_n(&m.mix(0.4, &mask), &[], n).unwrap().items
        };
        prop_assert_eq!(mati(1.0, 1.0), mati(c, 1.0));
        prop_assert_eq!(mati(1.0, 1.0), mati(1.0, c));
    }

    #[test]
    fn univariate_ranges(seed in any::<u64>()) {
        let log = random_log(&mut ChaCha8Rng::seed_from_u64(seed), 10, 15, 20);
        let cfg = UnivariateConfig::default();
        for p in 0..log.n_pois() {
            if let Ok(a) = poi_act(&log, p, 0) {
                prop_assert!((-1.0..=1.0).contains(&a.act));
            }
        }
        for u in 0..log.n_users() {
            for &p in user_poi_counts(&log, u, 0).keys() {
                let (d, e) = user_poi_probs(&log, u, p, 0).unwrap();
                prop_assert!((d + e - 1.0).abs() <= 1e-15);
            }
            if let Some(a) = absolute_user_act(&log, u, 1, 0) {
                prop_assert!((0.0..=1.0).contains(&a));
            }
            if let Ok(profile) = effective_user_act(&log, u, &cfg, CStarSource::Uniform) {
                prop_assert!(profile.effective_act >= 0.0);
                // Equal c* everywhere: the USG-weighted variant sees the same orientation.
                let rows: Vec<_> = profile.pois.iter().map(|c| (c.poi, c.p_d, c.p_e, 0.7)).collect();
                let flat = effective_user_act_from(u, &rows, cfg.lambda).unwrap();
                prop_assert_eq!(flat.orientation, profile.orientation);
            }
        }
    }

    #[test]
    fn quotas_sum_to_n(d in -1.0f64..1.0, e in -1.0f64..1.0, lambda in 0.01f64..0.99, xi in 0.0f64..0.99, n in 1usize..100) {
        prop_assert_eq!(m_avg_quotas(d, e, lambda, xi, n).iter().sum::<usize>(), n);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn em_log_likelihood_is_monotone(seed in any::<u64>()) {
        let Some(set) = small_set(seed, None, ModelSetConfig::default()) else { return Ok(()) };
        let ll = &set.em_report.as_ref().unwrap().log_likelihood;
        for w in ll.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0));
        }
    }

    #[test]
    fn phi_zero_single_slab_follows_pr_nu(seed in any::<u64>()) {
        let mut cfg = ModelSetConfig::default();
        cfg.mati.phi = 0.0;
        let trivial = SlabIndex::trivial(TemporalFactorSpec::day_of_week(0));
        let Some(set) = small_set(seed, Some(trivial), cfg) else { return Ok(()) };
        for u in 0..set.train.n_users() {
            let mati = set.recommend(Model::Mati, u, 10).unwrap();
            let usg = set.recommend(Model::Usg, u, 10).unwrap();
            prop_assert_eq!(mati.items, usg.items);
        }
    }

    #[test]
    fn full_psi_range_is_pure_mati(seed in any::<u64>()) {
        let mut cfg = ModelSetConfig::default();
        cfg.hybrid = HybridConfig::new(0.0, 1.0).unwrap();
        let Some(set) = small_set(seed, None, cfg) else { return Ok(()) };
        for u in 0..set.train.n_users() {
            let h = set.recommend(Model::Hybrid, u, 5).unwrap();
            let m = set.recommend(Model::Mati, u, 5).unwrap();
            prop_assert_eq!(h.path, Path::Temporal);
            prop_assert_eq!(h.items, m.items);
        }
    }

    #[test]
    fn decide_is_pure(psi in 0.0f64..=1.0, lo in 0.0f64..=1.0, width in 0.0f64..=1.0) {
        let cfg = HybridConfig::new(lo, (lo + width).min(1.0)).unwrap();
        let first = decide(psi, &cfg);
        prop_assert_eq!(decide(psi, &cfg), first);
        prop_assert_eq!(first == Path::Temporal, cfg.psi_range.0 <= psi && psi <= cfg.psi_range.1);
    }
}
