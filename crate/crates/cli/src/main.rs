//! `mati` command-line front end.
//!
//! Every stage reads the run configuration, loads the check-in data named
//! there and writes its artifacts into the output directory. JSON artifacts
//! wrap their content together with the run fingerprint; CSV and text
//! outputs carry it as a leading `#` line.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use mati::config::RunConfig;
use mati::evaluation::{
    evaluate, parse_grid, phi_sweep, psi_range_sweep, split_exclude, split_exclude_from, tuning_population,
    weights_sweep, EvalSplit, Fingerprint,
};
use mati::ingest::{dataset_stats, parse_checkins, parse_social, CheckInLog, SocialEdges};
use mati::mati::{EmReport, MatiParams};
use mati::pipeline::{Model, ModelSet};
use mati::slabs::{extract_slabs, ExtractionSummary, SlabIndex};
use mati::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "mati", version, about = "Temporal POI recommendation from check-in logs")]
struct Cli {
    /// TOML run configuration; relative paths inside it resolve against its
    /// directory. Without it every key takes its default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `run.output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse the raw files and write the canonical cache.
    Ingest,
    /// Corpus statistics.
    Stats,
    /// Extract temporal slabs and write the slab index.
    Slabs {
        /// Use the whole log instead of the evaluation training view.
        #[arg(long)]
        full: bool,
    },
    /// Fit the latent model against a slab index.
    Train {
        #[arg(long)]
        full: bool,
        /// Defaults to `<out>/slabs.json`.
        #[arg(long)]
        slabs: Option<PathBuf>,
    },
    /// Top-N lists for the given users as CSV.
    Recommend {
        #[arg(long = "user", required = true)]
        users: Vec<String>,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value = "hybrid")]
        model: String,
        #[arg(long)]
        full: bool,
        #[arg(long)]
        slabs: Option<PathBuf>,
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Exclusion-based evaluation of every model.
    Evaluate {
        /// Reuse a slab index instead of extracting one.
        #[arg(long, requires = "params")]
        slabs: Option<PathBuf>,
        #[arg(long, requires = "slabs")]
        params: Option<PathBuf>,
        /// Comma-separated model names; all models by default.
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
    },
    /// Grid search on the tuning split.
    Tune {
        #[arg(long, value_enum)]
        param: TuneParam,
        /// `start:stop:step` or a comma list. For `psi_range` this is the
        /// grid of lower bounds.
        #[arg(long)]
        grid: String,
        /// Grid of upper bounds for `psi_range`.
        #[arg(long)]
        grid_high: Option<String>,
        /// List length of the F1 objective; defaults to the first `eval.ns`.
        #[arg(long)]
        n: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TuneParam {
    #[value(name = "phi_t")]
    PhiT,
    /// USG (alpha, beta) pairs over the grid.
    Weights,
    #[value(name = "psi_range")]
    PsiRange,
}

impl TuneParam {
    fn name(self) -> &'static str {
        match self {
            TuneParam::PhiT => "phi_t",
            TuneParam::Weights => "weights",
            TuneParam::PsiRange => "psi_range",
        }
    }
}

/// A JSON artifact together with the fingerprint of the run that wrote it.
#[derive(Serialize, Deserialize)]
struct Artifact<T> {
    fingerprint: Fingerprint,
    content: T,
}

struct Run {
    cfg: RunConfig,
    config_sha256: String,
    out: PathBuf,
}

impl Run {
    fn load(cli: &Cli) -> Result<Run> {
        let (mut cfg, base) = match &cli.config {
            Some(path) => (
                RunConfig::load(path)?,
                path.parent().map(Path::to_path_buf).unwrap_or_default(),
            ),
            None => (RunConfig::from_toml_with("", std::env::vars())?, PathBuf::new()),
        };
        if let Some(seed) = cli.seed {
            cfg.run.seed = seed;
        }
        // Hash before paths are resolved so the fingerprint does not depend
        // on where the config file lives.
        let config_sha256 = cfg.sha256();
        let resolve = |p: &Path| if p.is_relative() && !p.as_os_str().is_empty() { base.join(p) } else { p.to_path_buf() };
        cfg.data.checkins = resolve(&cfg.data.checkins);
        cfg.data.social = resolve(&cfg.data.social);
        let out = cli.out.clone().unwrap_or_else(|| resolve(&cfg.run.output_dir));
        fs::create_dir_all(&out)?;
        Ok(Run { cfg, config_sha256, out })
    }

    fn fingerprint(&self, stages: &[&str], data_checksum: &str, slab_checksum: &str) -> Fingerprint {
        Fingerprint {
            config_sha256: self.config_sha256.clone(),
            seeds: stages.iter().map(|s| (s.to_string(), self.cfg.stage_seed(s))).collect::<BTreeMap<_, _>>(),
            data_checksum: data_checksum.to_string(),
            slab_checksum: slab_checksum.to_string(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, text)?;
        log(format!("wrote {}", path.display()));
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &str, fingerprint: &Fingerprint, content: &T) -> Result<()> {
        let artifact = Artifact {
            fingerprint: fingerprint.clone(),
            content,
        };
        let mut text = serde_json::to_string_pretty(&artifact)?;
        text.push('\n');
        self.write(name, &text)
    }

    fn load_log(&self) -> Result<CheckInLog> {
        let d = &self.cfg.data;
        let file = File::open(&d.checkins)
            .map_err(|e| Error::invalid(format!("{}: {e}", d.checkins.display())))?;
        let parsed = parse_checkins(BufReader::new(file), &self.cfg.checkin_format()?, d.on_error)?;
        if !parsed.skipped.is_empty() {
            log(format!("skipped {} malformed check-in lines", parsed.skipped.len()));
        }
        let social = if d.social.as_os_str().is_empty() {
            SocialEdges::default()
        } else {
            let file = File::open(&d.social).map_err(|e| Error::invalid(format!("{}: {e}", d.social.display())))?;
            parse_social(BufReader::new(file))?
        };
        let log_ = CheckInLog::new(parsed.records, social);
        log(format!("loaded {} check-ins of {} users", log_.checkins().len(), log_.n_users()));
        Ok(log_)
    }

    fn split(&self, log: &CheckInLog) -> Result<EvalSplit> {
        split_exclude(log, &self.cfg.split_config(), self.cfg.stage_seed("split"))
    }

    /// The whole log, or the training view of the evaluation split.
    fn view(&self, full: bool) -> Result<CheckInLog> {
        let log = self.load_log()?;
        if full {
            Ok(log)
        } else {
            Ok(self.split(&log)?.train)
        }
    }

    fn extract(&self, view: &CheckInLog) -> Result<(SlabIndex, ExtractionSummary)> {
        let t0 = Instant::now();
        let (index, _, summary) = extract_slabs(
            view,
            self.cfg.factor_specs(),
            &self.cfg.extract_config(),
            self.cfg.stage_seed("sampling"),
        )?;
        log(format!(
            "extracted {} slabs ({:?}) in {} sampling rounds, {:.1?}",
            index.n_slabs(),
            index.slab_counts(),
            summary.rounds,
            t0.elapsed()
        ));
        Ok((index.with_data_checksum(view.data_checksum()), summary))
    }

    fn train(&self, view: CheckInLog, index: SlabIndex) -> Result<ModelSet> {
        let t0 = Instant::now();
        let set = ModelSet::train(view, index, self.cfg.model_set_config()?)?;
        if let Some(r) = &set.em_report {
            log(format!(
                "EM: {} iterations, converged {}, {:.1?}",
                r.iterations,
                r.converged,
                t0.elapsed()
            ));
        }
        Ok(set)
    }

    fn load_index(&self, path: Option<&Path>, view: &CheckInLog) -> Result<SlabIndex> {
        let path = path.map(Path::to_path_buf).unwrap_or_else(|| self.path("slabs.json"));
        let index = SlabIndex::from_json(&read_content(&path)?)?;
        let data = view.data_checksum();
        if index.data_checksum.as_deref() != Some(data.as_str()) {
            return Err(Error::Stale(format!(
                "{} was extracted from different check-in data",
                path.display()
            )));
        }
        Ok(index)
    }

    fn load_set(&self, slabs: Option<&Path>, params: Option<&Path>, view: CheckInLog) -> Result<ModelSet> {
        let index = self.load_index(slabs, &view)?;
        let path = params.map(Path::to_path_buf).unwrap_or_else(|| self.path("params.json"));
        let params = MatiParams::from_json(&read_content(&path)?, &index)?;
        ModelSet::with_params(view, index, params, self.cfg.model_set_config()?)
    }
}

fn log(message: impl AsRef<str>) {
    eprintln!("[mati] {}", message.as_ref());
}

/// The `content` of a fingerprinted JSON artifact, as JSON text.
fn read_content(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    let artifact: Artifact<serde_json::Value> = serde_json::from_str(&text)?;
    Ok(artifact.content.to_string())
}

fn parse_models(names: &[String]) -> Result<Vec<Model>> {
    if names.is_empty() {
        return Ok(Model::ALL.to_vec());
    }
    names.iter().map(|n| n.parse()).collect()
}

fn run(cli: &Cli) -> Result<()> {
    let run = Run::load(cli)?;
    match &cli.command {
        Command::Ingest => {
            let log_ = run.load_log()?;
            let fp = run.fingerprint(&[], &log_.data_checksum(), "");
            run.write("checkins.tsv", &log_.to_canonical_tsv())?;
            run.write("social.tsv", &log_.social_tsv())?;
            run.write(
                "ingest.txt",
                &format!(
                    "# {}\nusers = {}\npois = {}\ncheckins = {}\nsocial_links = {}\n",
                    fp.line(),
                    log_.n_users(),
                    log_.n_pois(),
                    log_.checkins().len(),
                    log_.social().len()
                ),
            )?;
        }
        Command::Stats => {
            let log_ = run.load_log()?;
            let fp = run.fingerprint(&[], &log_.data_checksum(), "");
            let report = format!("# {}\n{}", fp.line(), dataset_stats(&log_)?.to_report());
            print!("{report}");
            run.write("stats.txt", &report)?;
        }
        Command::Slabs { full } => {
            let view = run.view(*full)?;
            let (index, summary) = run.extract(&view)?;
            let fp = run.fingerprint(&["split", "sampling"], &view.data_checksum(), &index.checksum);
            run.write_json("slabs.json", &fp, &index)?;
            run.write_json("slabs_summary.json", &fp, &summary)?;
            for m in &index.matrices {
                run.write(
                    &format!("similarity_{}.csv", m.factor.name),
                    &format!("# {}\n{}", fp.line(), m.to_csv()),
                )?;
            }
        }
        Command::Train { full, slabs } => {
            let view = run.view(*full)?;
            let index = run.load_index(slabs.as_deref(), &view)?;
            let fp = run.fingerprint(&["split", "sampling"], &view.data_checksum(), &index.checksum);
            let set = run.train(view, index)?;
            run.write_json("params.json", &fp, &set.params)?;
            let report: Option<&EmReport> = set.em_report.as_ref();
            run.write_json("em_report.json", &fp, &report)?;
        }
        Command::Recommend {
            users,
            n,
            model,
            full,
            slabs,
            params,
        } => {
            let model: Model = model.parse()?;
            let view = run.view(*full)?;
            let data = view.data_checksum();
            let set = run.load_set(slabs.as_deref(), params.as_deref(), view)?;
            let fp = run.fingerprint(&["split", "sampling"], &data, &set.index.checksum);
            let mut out = format!("# {}\nuser_id,rank,poi_id,score,path\n", fp.line());
            let mut notes = String::new();
            for id in users {
                let u = set
                    .train
                    .user_index(id)
                    .ok_or_else(|| Error::invalid(format!("unknown user `{id}`")))?;
                let rec = set.recommend(model, u, *n)?;
                for (rank, (&l, score)) in rec.items.iter().zip(&rec.scores).enumerate() {
                    out.push_str(&format!(
                        "{},{},{},{},{}\n",
                        id,
                        rank + 1,
                        set.train.poi_id(l),
                        score,
                        rec.path.as_str()
                    ));
                }
                if rec.short {
                    notes.push_str(&format!("# short list: {id} has {} of {n}\n", rec.items.len()));
                }
            }
            out.push_str(&notes);
            print!("{out}");
            run.write("recommendations.csv", &out)?;
        }
        Command::Evaluate { slabs, params, models } => {
            let models = parse_models(models)?;
            let log_ = run.load_log()?;
            let split = run.split(&log_)?;
            let set = match (slabs, params) {
                (Some(s), Some(p)) => run.load_set(Some(s), Some(p), split.train.clone())?,
                _ => {
                    let (index, _) = run.extract(&split.train)?;
                    run.train(split.train.clone(), index)?
                }
            };
            let fp = run.fingerprint(&["split", "sampling"], &log_.data_checksum(), &set.index.checksum);
            let t0 = Instant::now();
            let report = evaluate(&set, &split, &models, &run.cfg.eval.ns, fp)?;
            log(format!("evaluated {} test users, {:.1?}", report.test_users, t0.elapsed()));
            for m in &report.models {
                let cells: Vec<String> = m
                    .at
                    .iter()
                    .map(|a| format!("f1@{}={:.4} fail@{}={:.3}", a.n, a.f1, a.n, a.failure_rate))
                    .collect();
                println!("{:7} {}", m.model.as_str(), cells.join(" "));
            }
            run.write("eval_report.json", &report.to_json())?;
            run.write("eval_users.csv", &report.rows_csv())?;
        }
        Command::Tune {
            param,
            grid,
            grid_high,
            n,
        } => {
            let n = n.unwrap_or(run.cfg.eval.ns[0]);
            let log_ = run.load_log()?;
            let pool = tuning_population(&log_, run.cfg.eval.tune_min_checkins);
            let split = split_exclude_from(&log_, &pool, &run.cfg.tune_split_config(), run.cfg.stage_seed("tune"))?;
            let (index, _) = run.extract(&split.train)?;
            let set = run.train(split.train.clone(), index)?;
            let fp = run.fingerprint(&["tune", "sampling"], &log_.data_checksum(), &set.index.checksum);
            let values = parse_grid(grid)?;
            let result = match param {
                TuneParam::PhiT => phi_sweep(&set, &split, &values, n)?,
                TuneParam::Weights => weights_sweep(&set, &split, &values, n)?,
                TuneParam::PsiRange => {
                    let highs = match grid_high {
                        Some(g) => parse_grid(g)?,
                        None => values.clone(),
                    };
                    psi_range_sweep(&set, &split, &values, &highs, n)?
                }
            };
            let best = result.best_point();
            let setting = match param {
                TuneParam::PhiT => format!("[mati]\nphi_t = {}\n", best[0]),
                TuneParam::Weights => format!("[usg]\nalpha = {}\nbeta = {}\n", best[0], best[1]),
                TuneParam::PsiRange => format!("[hybrid]\npsi_range = [{}, {}]\n", best[0], best[1]),
            };
            let name = param.name();
            print!("{}", result.curve_csv(&fp));
            println!("# best f1@{n} = {}", result.best_objective());
            run.write(&format!("tune_{name}.csv"), &result.curve_csv(&fp))?;
            run.write(
                &format!("best_{name}.toml"),
                &format!("# {}\n# f1@{n} = {}\n{setting}", fp.line(), result.best_objective()),
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
