//! Executing cells and sweeps.

use std::time::Instant;

use catebench_core::attribution::attribute_batch;
use catebench_core::dgp::{
    generate, load_covariates_csv, synth_covariates, train_test_split, CovariateMatrix, DgpConfig, Observed,
    SemiSyntheticDataset,
};
use catebench_core::learners::{
    fit_dr_with, fit_nuisances, fit_s_learner, fit_tarnet, fit_x_with, t_from_nuisances, CateEstimator, NuisanceSet,
    Strategy,
};
use catebench_core::metrics::{attribution_share, pehe};
use catebench_core::nn::TrainConfig;
use catebench_core::rng::{Stream, Streams};
use rayon::prelude::*;

use crate::config::{CovariateSource, ExperimentConfig, Knob, LearnerSpec};
use crate::HarnessError;

/// Environment variable holding the number of worker threads.
pub const WORKERS_ENV: &str = "CATEBENCH_WORKERS";

/// One row of the result table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub dataset: String,
    pub learner: String,
    pub attr_method: String,
    pub knob: String,
    pub knob_value: f64,
    pub seed: u64,
    /// `NaN` when the metric could not be computed.
    pub attr_pred: f64,
    pub attr_prog: f64,
    pub pehe: f64,
    pub wall_ms: Option<f64>,
}

/// A validated configuration with its covariates loaded.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    shared_covariates: Option<CovariateMatrix>,
}

// Fit-stream indices. TARNet and every CFRNet share one index so that they
// start from the same initialization.
const FIT_NUISANCE: u64 = 0;
const FIT_S: u64 = 1;
const FIT_DR: u64 = 2;
const FIT_X: u64 = 3;
const FIT_REPRESENTATION: u64 = 4;

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let shared_covariates = match &config.covariates {
            CovariateSource::Csv { path, normalize } => Some(load_covariates_csv(path, *normalize)?),
            CovariateSource::Synthetic { .. } => None,
        };
        Ok(Self { config, shared_covariates })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    fn covariates(&self, streams: &Streams) -> Result<CovariateMatrix, HarnessError> {
        match (&self.shared_covariates, &self.config.covariates) {
            (Some(x), _) => Ok(x.clone()),
            (None, CovariateSource::Synthetic { n, d, rho }) => {
                Ok(synth_covariates(*n, *d, *rho, &mut streams.stream(Stream::Covariates))?)
            }
            (None, CovariateSource::Csv { .. }) => unreachable!("CSV covariates are loaded up front"),
        }
    }

    /// Data-generating parameters at one grid value.
    pub fn dgp_config(&self, knob_value: f64) -> DgpConfig {
        let c = &self.config;
        let mut dgp = DgpConfig {
            set_size: c.set_size,
            omega_pred: c.omega_pred,
            omega_nl: c.omega_nl,
            sigma: c.sigma,
            propensity: c.propensity,
            omega_pi: c.omega_pi,
        };
        match c.knob {
            Knob::PredictiveScale => dgp.omega_pred = knob_value,
            Knob::NonlinearityScale => dgp.omega_nl = knob_value,
            Knob::PropensityScale => dgp.omega_pi = knob_value,
        }
        dgp
    }

    /// The dataset and split of one cell. All randomness comes from the
    /// seed, so cells that differ only in the knob value share covariates,
    /// index sets, weights, assignment uniforms, noise and split.
    pub fn cell_data(
        &self,
        knob_value: f64,
        seed: u64,
    ) -> Result<(SemiSyntheticDataset, SemiSyntheticDataset), HarnessError> {
        let streams = Streams::new(seed);
        let x = self.covariates(&streams)?;
        let ds = generate(&x, &self.dgp_config(knob_value), &streams)?;
        Ok(train_test_split(&ds, self.config.test_fraction, &mut streams.stream(Stream::Split))?)
    }

    /// Generates, splits, fits every learner, attributes and scores. A
    /// learner that fails yields a record with `NaN` metrics.
    pub fn run_cell(&self, knob_value: f64, seed: u64) -> Result<Vec<ResultRecord>, HarnessError> {
        let c = &self.config;
        let streams = Streams::new(seed);
        let (train, test) = self.cell_data(knob_value, seed)?;
        let obs = train.observed();
        let truth = test.ground_truth();
        let (i_pred, i_prog) = (truth.sets.pred(), truth.sets.prog.clone());

        let specs = c.learner_specs();
        let needs_nuisances = specs.iter().any(|s| needs_first_stage(s.strategy));
        let nuisance_start = Instant::now();
        let nuisances: Option<Result<NuisanceSet, String>> = needs_nuisances.then(|| {
            fit_nuisances(obs, &c.training, &mut streams.indexed(Stream::Fit, FIT_NUISANCE)).map_err(|e| e.to_string())
        });
        let nuisance_ms = nuisance_start.elapsed().as_secs_f64() * 1e3;

        let mut records = Vec::with_capacity(specs.len());
        for spec in &specs {
            let start = Instant::now();
            let fitted = match (&nuisances, needs_first_stage(spec.strategy)) {
                (Some(Err(e)), true) => Err(format!("first-stage fit failed: {e}")),
                (n, _) => {
                    let n = n.as_ref().and_then(|r| r.as_ref().ok());
                    fit_learner(*spec, obs, &c.training, c.clip, n, &streams).map_err(|e| e.to_string())
                }
            };
            let mut rec = ResultRecord {
                dataset: c.covariates.tag(),
                learner: spec.label(),
                attr_method: c.attribution.name().to_string(),
                knob: c.knob.name().to_string(),
                knob_value,
                seed,
                attr_pred: f64::NAN,
                attr_prog: f64::NAN,
                pehe: f64::NAN,
                wall_ms: None,
            };
            match fitted {
                Ok(est) => {
                    let x = test.observed().x().view();
                    match est.predict_cate(x).and_then(|t| pehe(t.view(), truth.tau.view())) {
                        Ok(v) => rec.pehe = v,
                        Err(e) => warn(&rec, &e.to_string()),
                    }
                    let mut rng = streams.stream(Stream::Attribution);
                    let shares = attribute_batch(c.attribution, &est, x, &c.attribution_settings, &mut rng).and_then(|m| {
                        Ok((attribution_share(m.scores.view(), &i_pred)?.0, attribution_share(m.scores.view(), &i_prog)?.0))
                    });
                    match shares {
                        Ok((p, q)) => (rec.attr_pred, rec.attr_prog) = (p, q),
                        Err(e) => warn(&rec, &e.to_string()),
                    }
                }
                Err(e) => warn(&rec, &e),
            }
            if c.record_wall_time {
                let shared = if needs_first_stage(spec.strategy) { nuisance_ms } else { 0.0 };
                rec.wall_ms = Some(start.elapsed().as_secs_f64() * 1e3 + shared);
            }
            records.push(rec);
        }
        Ok(records)
    }

    /// Every (grid value, seed) cell, over a pool of `workers` threads.
    /// Records come back ordered by grid value, then seed, then learner,
    /// whatever the schedule.
    pub fn run(&self, workers: Option<usize>, progress: bool) -> Result<Vec<ResultRecord>, HarnessError> {
        let cells: Vec<(f64, u64)> = self
            .config
            .grid
            .iter()
            .flat_map(|&v| self.config.seed_list().into_iter().map(move |s| (v, s)))
            .collect();
        let total = cells.len();
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = workers {
            builder = builder.num_threads(n);
        }
        let pool = builder.build().map_err(|e| HarnessError::Runtime(format!("cannot start worker pool: {e}")))?;
        let done = std::sync::atomic::AtomicUsize::new(0);
        let results: Vec<Result<Vec<ResultRecord>, HarnessError>> = pool.install(|| {
            cells
                .par_iter()
                .map(|&(v, s)| {
                    let start = Instant::now();
                    let r = self.run_cell(v, s);
                    if progress {
                        let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                        eprintln!(
                            "[{k}/{total}] {}={v} seed={s} ({:.1}s)",
                            self.config.knob.name(),
                            start.elapsed().as_secs_f64()
                        );
                    }
                    r
                })
                .collect()
        });
        let mut out = Vec::new();
        for r in results {
            out.extend(r?);
        }
        Ok(out)
    }
}

pub fn needs_first_stage(strategy: Strategy) -> bool {
    matches!(strategy, Strategy::T | Strategy::Dr | Strategy::X)
}

/// Fits one learner with the stream layout used by experiment cells, so a
/// standalone fit with the same seed reproduces the estimator of a cell.
/// First-stage fits are reused when given and fitted otherwise.
pub fn fit_learner(
    spec: LearnerSpec,
    obs: &Observed,
    training: &TrainConfig,
    clip: f64,
    nuisances: Option<&NuisanceSet>,
    streams: &Streams,
) -> catebench_core::Result<CateEstimator> {
    let rng = |slot| streams.indexed(Stream::Fit, slot);
    let owned;
    let first_stage = match nuisances {
        Some(n) => Some(n),
        None if needs_first_stage(spec.strategy) => {
            owned = fit_nuisances(obs, training, &mut rng(FIT_NUISANCE))?;
            Some(&owned)
        }
        None => None,
    };
    match (spec.strategy, first_stage) {
        (Strategy::S, _) => fit_s_learner(obs, training, &mut rng(FIT_S)),
        (Strategy::Tarnet | Strategy::Cfrnet, _) => fit_tarnet(obs, spec.gamma, training, &mut rng(FIT_REPRESENTATION)),
        (Strategy::T, Some(n)) => t_from_nuisances(n),
        (Strategy::Dr, Some(n)) => fit_dr_with(obs, n, clip, training, &mut rng(FIT_DR)),
        (Strategy::X, Some(n)) => fit_x_with(obs, n, training, &mut rng(FIT_X)),
        (Strategy::T | Strategy::Dr | Strategy::X, None) => unreachable!("first stage is fitted above"),
    }
}

fn warn(rec: &ResultRecord, msg: &str) {
    eprintln!("warning: {} at {}={} seed {}: {msg}", rec.learner, rec.knob, rec.knob_value, rec.seed);
}

/// Worker count from [`WORKERS_ENV`], if set to a positive integer.
pub fn workers_from_env() -> Result<Option<usize>, HarnessError> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(HarnessError::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRecord>, HarnessError> {
    Experiment::new(config.clone())?.run(workers_from_env()?, false)
}

pub fn run_cell(config: &ExperimentConfig, knob_value: f64, seed: u64) -> Result<Vec<ResultRecord>, HarnessError> {
    Experiment::new(config.clone())?.run_cell(knob_value, seed)
}
