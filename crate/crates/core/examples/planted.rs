//! Tunes and evaluates every model on a planted corpus.
//!
//! `cargo run --release -p mati --example planted -- [seed]`

use std::time::Instant;

use mati::config::split_seed;
use mati::evaluation::{
    evaluate, parse_grid, phi_sweep, psi_range_sweep, split_exclude, split_exclude_from, tuning_population,
    EvalSplit, Fingerprint, SplitConfig,
};
use mati::pipeline::{Model, ModelSet, ModelSetConfig};
use mati::slabs::{extract_slabs, ExtractConfig};
use mati::synth::{planted_corpus, PlantedConfig};
use mati::temporal::TemporalFactorSpec;

fn train(split: &EvalSplit, cfg: ModelSetConfig, seed: u64) -> mati::Result<ModelSet> {
    let factors = vec![TemporalFactorSpec::hour_of_day(0), TemporalFactorSpec::day_of_week(0)];
    let extract = ExtractConfig {
        default_threshold: 0.5,
        ..Default::default()
    };
    let (index, _, _) = extract_slabs(&split.train, factors, &extract, seed)?;
    ModelSet::train(split.train.clone(), index, cfg)
}

fn main() -> mati::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let t0 = Instant::now();
    let corpus = planted_corpus(&PlantedConfig::default(), split_seed(seed, "corpus"));
    let log = &corpus.log;

    let pool = tuning_population(log, 15);
    let tune_cfg = SplitConfig { x: 0.3, test_fraction: 0.2 };
    let tune_split = split_exclude_from(log, &pool, &tune_cfg, split_seed(seed, "tune"))?;
    let mut cfg = ModelSetConfig::default();
    let tune_set = train(&tune_split, cfg, split_seed(seed, "sampling"))?;
    let phi = phi_sweep(&tune_set, &tune_split, &parse_grid("0:1:0.1")?, 5)?;
    for (p, o) in &phi.curve {
        println!("phi_t {:.1}  f1@5 {:.4}", p[0], o);
    }
    cfg.mati.phi = phi.best_point()[0];
    let tune_set = tune_set.with_phi(cfg.mati.phi)?;
    let lows = parse_grid("0:0.5:0.1")?;
    let highs = parse_grid("0.6:1:0.1")?;
    let range = psi_range_sweep(&tune_set, &tune_split, &lows, &highs, 5)?;
    cfg.hybrid.psi_range = (range.best_point()[0], range.best_point()[1]);
    println!("tuned phi_t {} psi_range {:?} ({:?})", cfg.mati.phi, cfg.hybrid.psi_range, t0.elapsed());

    let split = split_exclude(log, &SplitConfig { x: 0.3, test_fraction: 0.5 }, split_seed(seed, "split"))?;
    let set = train(&split, cfg, split_seed(seed, "sampling"))?;
    let report = evaluate(&set, &split, &Model::ALL, &[5, 10, 20], Fingerprint::default())?;
    for m in &report.models {
        let cells: Vec<String> = m
            .at
            .iter()
            .map(|a| format!("f1@{}={:.4} fail@{}={:.3}", a.n, a.f1, a.n, a.failure_rate))
            .collect();
        println!("{:7} {}  temporal={}", m.model.as_str(), cells.join("  "), m.temporal_path_users);
    }
    println!("({:?})", t0.elapsed());
    Ok(())
}
