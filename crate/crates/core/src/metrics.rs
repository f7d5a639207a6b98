//! Attribution and estimation accuracy against known ground truth.

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    /// Share of absolute attribution on predictive covariates.
    pub attr_pred: f64,
    /// Share of absolute attribution on prognostic covariates.
    pub attr_prog: f64,
    pub pehe: f64,
    /// Attribution rows that entered the averages.
    pub n_eval: usize,
}

/// Mean over rows of the fraction of `|a|` mass falling on `indices`, plus
/// the number of rows used. All-zero rows are skipped.
pub fn attribution_share(scores: ArrayView2<f64>, indices: &[usize]) -> Result<(f64, usize)> {
    let d = scores.ncols();
    if let Some(&bad) = indices.iter().find(|&&i| i >= d) {
        return Err(Error::Shape(format!("index {bad} out of range for {d} features")));
    }
    let mut total = 0.0;
    let mut used = 0;
    for row in scores.rows() {
        let mass: f64 = row.iter().map(|v| v.abs()).sum();
        if !mass.is_finite() {
            return Err(Error::Numeric("non-finite attribution score".into()));
        }
        if mass == 0.0 {
            continue;
        }
        let on: f64 = indices.iter().map(|&i| row[i].abs()).sum();
        total += on / mass;
        used += 1;
    }
    if used == 0 {
        return Err(Error::UndefinedMetric("every attribution row is zero".into()));
    }
    Ok((total / used as f64, used))
}

pub fn attr_pred(scores: ArrayView2<f64>, i_pred: &[usize]) -> Result<f64> {
    Ok(attribution_share(scores, i_pred)?.0)
}

pub fn attr_prog(scores: ArrayView2<f64>, i_prog: &[usize]) -> Result<f64> {
    Ok(attribution_share(scores, i_prog)?.0)
}

/// Root mean squared error of the effect estimates.
pub fn pehe(tau_hat: ArrayView1<f64>, tau: ArrayView1<f64>) -> Result<f64> {
    if tau_hat.len() != tau.len() {
        return Err(Error::Shape(format!("{} estimates for {} true effects", tau_hat.len(), tau.len())));
    }
    if tau.is_empty() {
        return Err(Error::Shape("no units to score".into()));
    }
    let sse: f64 = tau_hat.iter().zip(tau).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sse / tau.len() as f64).sqrt())
}

/// Scores one attribution matrix and one set of effect predictions.
pub fn evaluate(
    scores: ArrayView2<f64>,
    i_pred: &[usize],
    i_prog: &[usize],
    tau_hat: ArrayView1<f64>,
    tau: ArrayView1<f64>,
) -> Result<MetricsRecord> {
    let (attr_pred, n_eval) = attribution_share(scores, i_pred)?;
    let (attr_prog, _) = attribution_share(scores, i_prog)?;
    Ok(MetricsRecord { attr_pred, attr_prog, pehe: pehe(tau_hat, tau)?, n_eval })
}
