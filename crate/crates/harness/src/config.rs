//! Experiment configuration and the built-in presets.

use std::path::{Path, PathBuf};

use catebench_core::attribution::{AttributionMethod, AttributionSettings};
use catebench_core::dgp::{Normalization, PropensityKind};
use catebench_core::learners::{Strategy, DEFAULT_CLIP};
use catebench_core::nn::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// Where covariates come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovariateSource {
    /// Equicorrelated standard normals, redrawn for every seed.
    Synthetic { n: usize, d: usize, #[serde(default)] rho: f64 },
    /// A CSV file with a header of feature names, shared by every seed.
    Csv { path: PathBuf, #[serde(default = "default_normalization")] normalize: Normalization },
}

fn default_normalization() -> Normalization {
    Normalization::Zscore
}

impl CovariateSource {
    pub fn tag(&self) -> String {
        match self {
            Self::Synthetic { .. } => "synthetic".into(),
            Self::Csv { path, .. } => path.file_stem().map_or_else(|| "csv".into(), |s| s.to_string_lossy().into_owned()),
        }
    }
}

/// The data-generating parameter varied along the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Knob {
    PredictiveScale,
    NonlinearityScale,
    PropensityScale,
}

impl Knob {
    pub fn name(self) -> &'static str {
        match self {
            Self::PredictiveScale => "predictive_scale",
            Self::NonlinearityScale => "nonlinearity_scale",
            Self::PropensityScale => "propensity_scale",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Self::PredictiveScale, Self::NonlinearityScale, Self::PropensityScale].into_iter().find(|k| k.name() == name)
    }
}

/// A complete sweep: a grid over one knob, crossed with seeds and learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub covariates: CovariateSource,
    /// Size of each covariate index set; `⌊0.2 · d⌋` when absent.
    pub set_size: Option<usize>,
    pub knob: Knob,
    pub grid: Vec<f64>,
    pub omega_pred: f64,
    pub omega_nl: f64,
    pub sigma: f64,
    pub propensity: PropensityKind,
    pub omega_pi: f64,
    pub learners: Vec<Strategy>,
    /// Balancing strengths fitted for every listed CFRNet.
    pub gammas: Vec<f64>,
    pub attribution: AttributionMethod,
    pub attribution_settings: AttributionSettings,
    pub seeds: usize,
    /// Seeds run are `first_seed .. first_seed + seeds`.
    pub first_seed: u64,
    pub test_fraction: f64,
    pub clip: f64,
    pub training: TrainConfig,
    /// Fill the `wall_ms` column. Off by default so that result files are
    /// byte-reproducible.
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            covariates: CovariateSource::Synthetic { n: 5000, d: 30, rho: 0.0 },
            set_size: None,
            knob: Knob::PredictiveScale,
            grid: vec![1e-3, 1e-2, 1e-1, 0.5, 1.0],
            omega_pred: 1.0,
            omega_nl: 0.0,
            sigma: 0.1,
            propensity: PropensityKind::Uniform,
            omega_pi: 0.0,
            learners: vec![Strategy::S, Strategy::T, Strategy::X, Strategy::Dr, Strategy::Tarnet],
            gammas: vec![0.1, 1.0, 10.0],
            attribution: AttributionMethod::IntegratedGradients,
            attribution_settings: AttributionSettings::default(),
            seeds: 30,
            first_seed: 0,
            test_fraction: 0.2,
            clip: DEFAULT_CLIP,
            training: TrainConfig::default(),
            record_wall_time: false,
        }
    }
}

/// Training used by the desk-scale presets: a larger step size and smaller
/// batches so that a sweep fits on one CPU.
pub fn desk_training() -> TrainConfig {
    TrainConfig { learning_rate: 1e-3, batch_size: 256, max_epochs: 200, patience: 10, ..TrainConfig::default() }
}

pub const PRESETS: [&str; 6] = ["exp1", "exp2", "exp3", "exp1-desk", "exp2-desk", "exp3-desk"];

impl ExperimentConfig {
    /// Built-in sweeps: predictive scale (`exp1`), nonlinearity (`exp2`) and
    /// predictive confounding (`exp3`). `-desk` variants use 5 seeds, a
    /// shorter grid where applicable and [`desk_training`].
    pub fn preset(name: &str) -> Option<Self> {
        let (base, desk) = match name.strip_suffix("-desk") {
            Some(b) => (b, true),
            None => (name, false),
        };
        let mut cfg = match base {
            "exp1" => Self::default(),
            "exp2" => Self {
                knob: Knob::NonlinearityScale,
                grid: if desk { vec![0.0, 0.5, 1.0] } else { vec![0.0, 0.25, 0.5, 0.75, 1.0] },
                ..Self::default()
            },
            "exp3" => Self {
                knob: Knob::PropensityScale,
                grid: if desk { vec![0.0, 2.0] } else { vec![0.0, 0.5, 1.0, 2.0, 4.0] },
                propensity: PropensityKind::PredictiveConfounding,
                learners: vec![Strategy::S, Strategy::T, Strategy::X, Strategy::Dr, Strategy::Tarnet, Strategy::Cfrnet],
                gammas: if desk { vec![10.0] } else { vec![0.1, 1.0, 10.0] },
                seeds: 10,
                ..Self::default()
            },
            _ => return None,
        };
        if desk {
            cfg.seeds = 5;
            cfg.training = desk_training();
        }
        Some(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.grid.is_empty() {
            return bad("knob grid is empty".into());
        }
        if self.seeds == 0 {
            return bad("need at least one seed".into());
        }
        if self.learners.is_empty() {
            return bad("no learners listed".into());
        }
        for &v in &self.grid {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("grid value {v} must be a finite non-negative number"));
            }
            if self.knob == Knob::NonlinearityScale && v > 1.0 {
                return bad(format!("nonlinearity scale {v} exceeds 1"));
            }
        }
        if !(0.0..=1.0).contains(&self.omega_nl) {
            return bad(format!("omega_nl = {} outside [0, 1]", self.omega_nl));
        }
        for (name, v) in [("omega_pred", self.omega_pred), ("omega_pi", self.omega_pi), ("sigma", self.sigma)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} = {v} must be finite and non-negative"));
            }
        }
        if self.learners.contains(&Strategy::Cfrnet) && !self.gammas.iter().any(|&g| g > 0.0) {
            return bad("CFRNet listed but no positive gamma given".into());
        }
        if self.gammas.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return bad("gammas must be finite and non-negative".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test fraction {} outside (0, 1)", self.test_fraction));
        }
        if !(self.clip > 0.0 && self.clip < 0.5) {
            return bad(format!("clip {} outside (0, 0.5)", self.clip));
        }
        if self.attribution_settings.cap == 0 || self.attribution_settings.ig_steps == 0 {
            return bad("attribution cap and step count must be positive".into());
        }
        if let CovariateSource::Synthetic { n, d, rho } = self.covariates {
            if n < 10 || d < 4 || !(0.0..1.0).contains(&rho) {
                return bad(format!("synthetic covariates need n >= 10, d >= 4, rho in [0, 1); got n={n}, d={d}, rho={rho}"));
            }
        }
        self.training.validate().map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.first_seed + i).collect()
    }

    /// The learners actually fitted: one entry per listed strategy, with
    /// CFRNet expanded over the positive gammas.
    pub fn learner_specs(&self) -> Vec<LearnerSpec> {
        let mut out = Vec::new();
        for &s in &self.learners {
            if s == Strategy::Cfrnet {
                out.extend(self.gammas.iter().filter(|&&g| g > 0.0).map(|&g| LearnerSpec { strategy: s, gamma: g }));
            } else {
                out.push(LearnerSpec { strategy: s, gamma: 0.0 });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerSpec {
    pub strategy: Strategy,
    pub gamma: f64,
}

impl LearnerSpec {
    /// Label used in result files, e.g. `t` or `cfrnet_g10`.
    pub fn label(&self) -> String {
        match self.strategy {
            Strategy::Cfrnet => format!("cfrnet_g{}", self.gamma),
            s => s.name().to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for name in PRESETS {
            let cfg = ExperimentConfig::preset(name).unwrap();
            cfg.validate().unwrap();
            assert_eq!(ExperimentConfig::from_json_str(&cfg.to_json()).unwrap(), cfg);
        }
        assert!(ExperimentConfig::preset("exp4").is_none());
    }

    #[test]
    fn experiment_one_grid() {
        assert_eq!(ExperimentConfig::preset("exp1").unwrap().grid, vec![1e-3, 1e-2, 1e-1, 0.5, 1.0]);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            r#"{"grid": []}"#,
            r#"{"seeds": 0}"#,
            r#"{"knob": "nonlinearity_scale", "grid": [0.5, 1.5]}"#,
            r#"{"grid": [-1]}"#,
            r#"{"unknown_field": 1}"#,
            r#"{"learners": ["cfrnet"], "gammas": [0]}"#,
        ] {
            assert!(matches!(ExperimentConfig::from_json_str(text), Err(HarnessError::Config(_))), "{text}");
        }
    }

    #[test]
    fn cfrnet_expands_over_gammas() {
        let cfg = ExperimentConfig { learners: vec![Strategy::Tarnet, Strategy::Cfrnet], gammas: vec![0.0, 0.1, 10.0], ..Default::default() };
        let labels: Vec<String> = cfg.learner_specs().iter().map(LearnerSpec::label).collect();
        assert_eq!(labels, vec!["tarnet", "cfrnet_g0.1", "cfrnet_g10"]);
    }
}
