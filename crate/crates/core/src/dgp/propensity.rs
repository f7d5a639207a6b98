//! Treatment-assignment mechanisms: `π(x) = sigmoid(ω_π · z[ψ(x)])`.

use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::model::{eval_components_batch, FeatureIndexSets, OutcomeModel};
use crate::nn::sigmoid;
use crate::{Error, Result};

/// What assignment is based on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropensityKind {
    /// `π ≡ 0.5`.
    #[default]
    Uniform,
    /// `ψ = f_pred,1 − f_pred,0`.
    PredictiveConfounding,
    /// `ψ = μ_prog`.
    PrognosticConfounding,
    /// `ψ = x_i` for an index outside every outcome set.
    Nonconfounded,
}

impl PropensityKind {
    pub fn name(self) -> &'static str {
        match self {
            PropensityKind::Uniform => "uniform",
            PropensityKind::PredictiveConfounding => "predictive_confounding",
            PropensityKind::PrognosticConfounding => "prognostic_confounding",
            PropensityKind::Nonconfounded => "nonconfounded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropensitySpec {
    pub kind: PropensityKind,
    pub omega_pi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub irrelevant_index: Option<usize>,
}

impl PropensitySpec {
    pub fn uniform() -> Self {
        Self { kind: PropensityKind::Uniform, omega_pi: 0.0, irrelevant_index: None }
    }

    pub fn validate(&self, sets: &FeatureIndexSets, d: usize) -> Result<()> {
        if !(self.omega_pi.is_finite() && self.omega_pi >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "propensity scale must be finite and >= 0, got {}",
                self.omega_pi
            )));
        }
        if self.kind == PropensityKind::Nonconfounded {
            let i = self.irrelevant_index.ok_or_else(|| {
                Error::InvalidConfig("nonconfounded propensity needs an irrelevant index".into())
            })?;
            if i >= d {
                return Err(Error::Shape(format!("irrelevant index {i} out of range for {d} features")));
            }
            if sets.relevant().contains(&i) {
                return Err(Error::InvalidConfig(format!("index {i} is used by an outcome function")));
            }
        }
        Ok(())
    }
}

/// Mean and population standard deviation of `ψ` over the fitting units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZScoreStats {
    pub mean: f64,
    pub std: f64,
}

impl ZScoreStats {
    pub fn fit(values: &Array1<f64>) -> Result<Self> {
        let mean = values
            .mean()
            .ok_or_else(|| Error::Normalization("no units to fit the z-score on".into()))?;
        let std = values.mapv(|v| (v - mean).powi(2)).mean().unwrap_or(0.0).sqrt();
        if !(std > 0.0 && std.is_finite()) {
            return Err(Error::Normalization("assignment score is constant over the fitting units".into()));
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }
}

fn psi(
    spec: &PropensitySpec,
    model: &OutcomeModel,
    sets: &FeatureIndexSets,
    x: ArrayView2<f64>,
) -> Result<Array1<f64>> {
    match spec.kind {
        PropensityKind::Uniform => Ok(Array1::zeros(x.nrows())),
        PropensityKind::PredictiveConfounding => {
            let (_, f0, f1) = eval_components_batch(model, sets, x)?;
            Ok(f1 - f0)
        }
        PropensityKind::PrognosticConfounding => Ok(eval_components_batch(model, sets, x)?.0),
        PropensityKind::Nonconfounded => {
            let i = spec.irrelevant_index.expect("validated");
            Ok(x.column(i).to_owned())
        }
    }
}

/// Propensity scores of `x_query`, with the z-score fitted on `x_fit`.
/// Returns `None` stats for the uniform mechanism.
pub fn propensity_scores(
    spec: &PropensitySpec,
    model: &OutcomeModel,
    sets: &FeatureIndexSets,
    x_fit: ArrayView2<f64>,
    x_query: ArrayView2<f64>,
) -> Result<(Array1<f64>, Option<ZScoreStats>)> {
    if x_fit.ncols() != x_query.ncols() {
        return Err(Error::Shape("fitting and query covariates differ in width".into()));
    }
    spec.validate(sets, x_fit.ncols())?;
    if spec.kind == PropensityKind::Uniform {
        return Ok((Array1::from_elem(x_query.nrows(), 0.5), None));
    }
    let stats = ZScoreStats::fit(&psi(spec, model, sets, x_fit)?)?;
    // Keep scores strictly inside (0, 1) even where the sigmoid saturates.
    let lo = f64::EPSILON;
    let pi = psi(spec, model, sets, x_query)?
        .mapv(|v| sigmoid(spec.omega_pi * stats.apply(v)).clamp(lo, 1.0 - lo));
    Ok((pi, Some(stats)))
}
