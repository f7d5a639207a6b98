//! The `catebench` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use catebench_core::attribution::{attribute_batch, read_attribution_csv, AttributionMethod};
use catebench_core::dgp::{
    read_observed_csv, read_sidecar, read_truth_csv, write_dataset_csv, write_sidecar, write_truth_csv,
};
use catebench_core::learners::{load_estimator, save_estimator, Strategy};
use catebench_core::metrics::{attribution_share, pehe, MetricsRecord};
use catebench_core::rng::{Stream, Streams};
use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, Knob, LearnerSpec, PRESETS};
use crate::plot::emit_plot_svg;
use crate::report::{aggregate, emit_csv, emit_summary_csv, read_csv, Metric};
use crate::run::{fit_learner, workers_from_env, Experiment};
use crate::HarnessError;

#[derive(Debug, Parser)]
#[command(name = "catebench", version, about = "Attribution benchmark for neural CATE estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// JSON experiment config; fields left out take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in config: exp1, exp2, exp3 or their -desk variants.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig, HarnessError> {
        let cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => ExperimentConfig::preset(name).ok_or_else(|| {
                HarnessError::Config(format!("unknown preset {name:?}; choose one of {}", PRESETS.join(", ")))
            })?,
            (None, None) => ExperimentConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate one dataset: train/test CSVs, their ground truth and truth.json.
    Generate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Knob value; defaults to the last grid value.
        #[arg(long)]
        knob_value: Option<f64>,
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
    /// Fit a learner on an observed-data CSV.
    Fit {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        /// s, t, tarnet, cfrnet, dr or x.
        #[arg(long)]
        learner: String,
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory receiving manifest.json and weights.bin.
        #[arg(long, default_value = "model")]
        out: PathBuf,
    },
    /// Attribute a fitted estimator on the rows of an observed-data CSV.
    Attribute {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Defaults to the config's method.
        #[arg(long)]
        method: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "attributions.csv")]
        out: PathBuf,
    },
    /// Score attributions and effect predictions against ground truth.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        attributions: PathBuf,
        /// Ground-truth CSV covering the data rows.
        #[arg(long)]
        truth: PathBuf,
        /// JSON sidecar with the index sets.
        #[arg(long)]
        sidecar: PathBuf,
    },
    /// Run a sweep and write results.csv, summary.csv and one SVG per metric.
    Experiment {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        seeds: Option<usize>,
        /// Worker threads; overrides the CATEBENCH_WORKERS variable.
        #[arg(long)]
        workers: Option<usize>,
        /// Fill the wall_ms column (makes results time-dependent).
        #[arg(long)]
        timing: bool,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Plot one metric of a results CSV.
    Plot {
        #[arg(long)]
        results: PathBuf,
        /// attr_pred, attr_prog or pehe.
        #[arg(long, default_value = "attr_pred")]
        metric: String,
        #[arg(long, default_value = "plot.svg")]
        out: PathBuf,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn create_dir(path: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(path).map_err(|e| HarnessError::Runtime(format!("cannot create {}: {e}", path.display())))
}

fn parse_learner(name: &str, gamma: f64) -> Result<LearnerSpec, HarnessError> {
    let strategy = Strategy::from_name(name).ok_or_else(|| HarnessError::Config(format!("unknown learner {name:?}")))?;
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(HarnessError::Config(format!("gamma must be >= 0, got {gamma}")));
    }
    match (strategy, gamma > 0.0) {
        (Strategy::Cfrnet, false) => Err(HarnessError::Config("cfrnet needs --gamma > 0".into())),
        (Strategy::Tarnet, true) => Ok(LearnerSpec { strategy: Strategy::Cfrnet, gamma }),
        (Strategy::Cfrnet | Strategy::Tarnet, _) => Ok(LearnerSpec { strategy, gamma }),
        (_, true) => Err(HarnessError::Config(format!("--gamma only applies to tarnet/cfrnet, not {name}"))),
        (_, false) => Ok(LearnerSpec { strategy, gamma: 0.0 }),
    }
}

fn execute(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Generate { cfg, seed, knob_value, out } => {
            let cfg = cfg.load()?;
            let value = knob_value.unwrap_or(*cfg.grid.last().expect("validated grid"));
            let upper = if cfg.knob == Knob::NonlinearityScale { 1.0 } else { f64::INFINITY };
            if !(0.0..=upper).contains(&value) {
                return Err(HarnessError::Config(format!("knob value {value} outside the knob's domain")));
            }
            let exp = Experiment::new(cfg)?;
            let (train, test) = exp.cell_data(value, seed)?;
            create_dir(&out)?;
            write_dataset_csv(&train, &out.join("train.csv"))?;
            write_dataset_csv(&test, &out.join("test.csv"))?;
            write_truth_csv(&train, &out.join("train_truth.csv"))?;
            write_truth_csv(&test, &out.join("test_truth.csv"))?;
            write_sidecar(&test, &out.join("truth.json"))?;
            eprintln!("wrote {} train and {} test units to {}", train.n_units(), test.n_units(), out.display());
        }
        Command::Fit { cfg, data, learner, gamma, seed, out } => {
            let cfg = cfg.load()?;
            let spec = parse_learner(&learner, gamma)?;
            let loaded = read_observed_csv(&data)?;
            let est = fit_learner(spec, &loaded.observed, &cfg.training, cfg.clip, None, &Streams::new(seed))?
                .with_seed(seed);
            create_dir(&out)?;
            save_estimator(&est, &out.join("manifest.json"), &out.join("weights.bin"))?;
            eprintln!("saved {} to {}", spec.label(), out.display());
        }
        Command::Attribute { cfg, model, data, method, seed, out } => {
            let cfg = cfg.load()?;
            let method = match method {
                Some(m) => AttributionMethod::from_name(&m)?,
                None => cfg.attribution,
            };
            let est = load_estimator(&model.join("manifest.json"), &model.join("weights.bin"))?;
            let loaded = read_observed_csv(&data)?;
            let mut rng = Streams::new(seed).stream(Stream::Attribution);
            let m = attribute_batch(method, &est, loaded.observed.x().view(), &cfg.attribution_settings, &mut rng)?;
            m.write_csv(&loaded.unit_ids, &out)?;
        }
        Command::Evaluate { model, data, attributions, truth, sidecar } => {
            let est = load_estimator(&model.join("manifest.json"), &model.join("weights.bin"))?;
            let loaded = read_observed_csv(&data)?;
            let sidecar = read_sidecar(&sidecar)?;
            let truth_rows = read_truth_csv(&truth)?;
            let tau_by_id: std::collections::HashMap<usize, f64> = truth_rows.iter().map(|r| (r.unit_id, r.tau)).collect();
            let tau: Vec<f64> = loaded
                .unit_ids
                .iter()
                .map(|id| tau_by_id.get(id).copied().ok_or_else(|| HarnessError::Config(format!("no ground truth for unit {id}"))))
                .collect::<Result<_, _>>()?;
            let tau_hat = est.predict_cate(loaded.observed.x().view())?;
            let attr = read_attribution_csv(&attributions)?;
            let (attr_pred, n_eval) = attribution_share(attr.scores.view(), &sidecar.sets.pred())?;
            let (attr_prog, _) = attribution_share(attr.scores.view(), &sidecar.sets.prog)?;
            let record = MetricsRecord { attr_pred, attr_prog, pehe: pehe(tau_hat.view(), ndarray::ArrayView1::from(&tau))?, n_eval };
            println!("{}", serde_json::to_string_pretty(&record).expect("record serializes"));
        }
        Command::Experiment { cfg, seeds, workers, timing, out, quiet } => {
            let mut cfg = cfg.load()?;
            if let Some(n) = seeds {
                cfg.seeds = n;
            }
            cfg.record_wall_time |= timing;
            let workers = match workers {
                Some(0) => return Err(HarnessError::Config("--workers must be positive".into())),
                Some(n) => Some(n),
                None => workers_from_env()?,
            };
            let exp = Experiment::new(cfg)?;
            let records = exp.run(workers, !quiet)?;
            create_dir(&out)?;
            std::fs::write(out.join("config.json"), exp.config().to_json() + "\n")
                .map_err(|e| HarnessError::Runtime(e.to_string()))?;
            emit_csv(&records, &out.join("results.csv"))?;
            let agg = aggregate(&records);
            emit_summary_csv(&agg, &out.join("summary.csv"))?;
            for m in Metric::ALL {
                if let Err(e) = emit_plot_svg(&agg, m, &out.join(format!("{}.svg", m.name()))) {
                    eprintln!("warning: {e}");
                }
            }
            eprintln!("wrote {} records to {}", records.len(), out.display());
        }
        Command::Plot { results, metric, out } => {
            let metric = Metric::from_name(&metric)
                .ok_or_else(|| HarnessError::Config(format!("unknown metric {metric:?}; use attr_pred, attr_prog or pehe")))?;
            let records = read_csv(&results)?;
            emit_plot_svg(&aggregate(&records), metric, &out)?;
        }
    }
    Ok(())
}
