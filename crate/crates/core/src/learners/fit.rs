use ndarray::{Array1, ArrayView1, Axis};

use super::estimator::{CateEstimator, Networks, Strategy};
use crate::dgp::Observed;
use crate::nn::{fit_network, Activation, Loss, Mlp, TrainConfig};
use crate::rng::Rng;
use crate::{Error, Result};

/// Width of every hidden layer.
pub const HIDDEN: usize = 100;

/// Propensity clipping used in pseudo-outcomes unless configured otherwise.
pub const DEFAULT_CLIP: f64 = 0.01;

/// A fresh `d → 100 → 100 → 1` network.
pub fn regression_net(d: usize, output: Activation, rng: &mut Rng) -> Result<Mlp> {
    Mlp::new(&[d, HIDDEN, HIDDEN, 1], output, rng)
}

/// First-stage fits: outcome regressions per arm and the propensity model.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceSet {
    pub mu0: Mlp,
    pub mu1: Mlp,
    /// Sigmoid output, so predictions lie in (0, 1).
    pub pi: Mlp,
}

impl NuisanceSet {
    pub fn new(mu0: Mlp, mu1: Mlp, pi: Mlp) -> Result<Self> {
        let d = mu0.input_dim();
        if mu1.input_dim() != d || pi.input_dim() != d {
            return Err(Error::Shape("nuisance networks disagree on the input dimension".into()));
        }
        if [&mu0, &mu1, &pi].iter().any(|n| n.output_dim() != 1) {
            return Err(Error::Shape("nuisance networks must have one output".into()));
        }
        if pi.output_activation() != Activation::Sigmoid {
            return Err(Error::InvalidConfig("the propensity network needs a sigmoid output".into()));
        }
        Ok(Self { mu0, mu1, pi })
    }

    /// `(μ̂₀(x), μ̂₁(x), π̂(x))` for every row.
    pub fn predict(&self, x: ndarray::ArrayView2<f64>) -> Result<(Array1<f64>, Array1<f64>, Array1<f64>)> {
        Ok((self.mu0.predict(x)?, self.mu1.predict(x)?, self.pi.predict(x)?))
    }
}

fn fit_arm(obs: &Observed, treated: bool, config: &TrainConfig, rng: &mut Rng) -> Result<Mlp> {
    let rows = obs.arm_rows(treated);
    let x = obs.x().select(Axis(0), &rows);
    let y = obs.y().select(Axis(0), &rows);
    let net = regression_net(obs.n_features(), Activation::Identity, rng)?;
    Ok(fit_network(net, x.view(), y.view(), None, Loss::SquaredError, config, rng)?.0)
}

fn fit_regression(obs: &Observed, target: ArrayView1<f64>, rows: Option<&[usize]>, config: &TrainConfig, rng: &mut Rng) -> Result<Mlp> {
    let net = regression_net(obs.n_features(), Activation::Identity, rng)?;
    let fitted = match rows {
        Some(rows) => {
            let x = obs.x().select(Axis(0), rows);
            let t = target.select(Axis(0), rows);
            fit_network(net, x.view(), t.view(), None, Loss::SquaredError, config, rng)?
        }
        None => fit_network(net, obs.x().view(), target, None, Loss::SquaredError, config, rng)?,
    };
    Ok(fitted.0)
}

/// Fits `μ̂₀` on controls, `μ̂₁` on treated units and `π̂` on everyone, in
/// that order.
pub fn fit_nuisances(train: &Observed, config: &TrainConfig, rng: &mut Rng) -> Result<NuisanceSet> {
    train.require_both_arms()?;
    let mu0 = fit_arm(train, false, config, rng)?;
    let mu1 = fit_arm(train, true, config, rng)?;
    let net = regression_net(train.n_features(), Activation::Sigmoid, rng)?;
    let w = train.w();
    let (pi, _) = fit_network(net, train.x().view(), w.view(), None, Loss::BinaryCrossEntropy, config, rng)?;
    NuisanceSet::new(mu0, mu1, pi)
}

/// One network on `(x, w)`; `τ̂(x) = μ̂(x, 1) − μ̂(x, 0)`.
pub fn fit_s_learner(train: &Observed, config: &TrainConfig, rng: &mut Rng) -> Result<CateEstimator> {
    train.require_both_arms()?;
    let xw = ndarray::concatenate![Axis(1), train.x().view(), train.w().insert_axis(Axis(1))];
    let net = regression_net(train.n_features() + 1, Activation::Identity, rng)?;
    let (net, _) = fit_network(net, xw.view(), train.y().view(), None, Loss::SquaredError, config, rng)?;
    CateEstimator::new(Strategy::S, Networks::Single { net }, 0.0, DEFAULT_CLIP)
}

/// Fits the two outcome regressions exactly as [`fit_nuisances`] does.
pub fn fit_t_learner(train: &Observed, config: &TrainConfig, rng: &mut Rng) -> Result<CateEstimator> {
    train.require_both_arms()?;
    let mu0 = fit_arm(train, false, config, rng)?;
    let mu1 = fit_arm(train, true, config, rng)?;
    CateEstimator::new(Strategy::T, Networks::TwoModels { mu0, mu1 }, 0.0, DEFAULT_CLIP)
}

/// The T-learner implied by already fitted nuisances.
pub fn t_from_nuisances(nuisances: &NuisanceSet) -> Result<CateEstimator> {
    CateEstimator::new(
        Strategy::T,
        Networks::TwoModels { mu0: nuisances.mu0.clone(), mu1: nuisances.mu1.clone() },
        0.0,
        DEFAULT_CLIP,
    )
}

/// AIPW pseudo-outcome with `π̂` clipped into `[clip, 1 − clip]`.
pub fn dr_pseudo_outcome(y: f64, treated: bool, pi_hat: f64, mu0_hat: f64, mu1_hat: f64, clip: f64) -> f64 {
    let p = pi_hat.clamp(clip, 1.0 - clip);
    let w = if treated { 1.0 } else { 0.0 };
    let (a, b) = (w / p, (1.0 - w) / (1.0 - p));
    (a - b) * y + ((1.0 - a) * mu1_hat - (1.0 - b) * mu0_hat)
}

fn check_clip(clip: f64) -> Result<()> {
    if !(clip > 0.0 && clip < 0.5) {
        return Err(Error::InvalidConfig(format!("clip must lie in (0, 0.5), got {clip}")));
    }
    Ok(())
}

/// Second DR stage from given nuisance values at the training units.
pub fn fit_dr_from_predictions(
    train: &Observed,
    mu0_hat: ArrayView1<f64>,
    mu1_hat: ArrayView1<f64>,
    pi_hat: ArrayView1<f64>,
    clip: f64,
    config: &TrainConfig,
    rng: &mut Rng,
) -> Result<CateEstimator> {
    check_clip(clip)?;
    let n = train.n_units();
    if mu0_hat.len() != n || mu1_hat.len() != n || pi_hat.len() != n {
        return Err(Error::Shape(format!("nuisance values do not cover the {n} training units")));
    }
    let target: Array1<f64> = (0..n)
        .map(|i| dr_pseudo_outcome(train.y()[i], train.treated()[i], pi_hat[i], mu0_hat[i], mu1_hat[i], clip))
        .collect();
    let tau = fit_regression(train, target.view(), None, config, rng)?;
    CateEstimator::new(Strategy::Dr, Networks::Direct { tau }, 0.0, clip)
}

pub fn fit_dr_with(
    train: &Observed,
    nuisances: &NuisanceSet,
    clip: f64,
    config: &TrainConfig,
    rng: &mut Rng,
) -> Result<CateEstimator> {
    train.require_both_arms()?;
    let (m0, m1, p) = nuisances.predict(train.x().view())?;
    fit_dr_from_predictions(train, m0.view(), m1.view(), p.view(), clip, config, rng)
}

pub fn fit_dr_learner(train: &Observed, config: &TrainConfig, rng: &mut Rng) -> Result<CateEstimator> {
    let nuisances = fit_nuisances(train, config, rng)?;
    fit_dr_with(train, &nuisances, DEFAULT_CLIP, config, rng)
}

/// Arm-wise effect regressions blended by `g = π̂`.
///
/// Treated units regress `Y − μ̂₀(X)`, controls regress `μ̂₁(X) − Y`.
pub fn fit_x_with(train: &Observed, nuisances: &NuisanceSet, config: &TrainConfig, rng: &mut Rng) -> Result<CateEstimator> {
    train.require_both_arms()?;
    let (m0, m1, _) = nuisances.predict(train.x().view())?;
    let y = train.y();
    let target: Array1<f64> = (0..train.n_units())
        .map(|i| if train.treated()[i] { y[i] - m0[i] } else { m1[i] - y[i] })
        .collect();
    let tau1 = fit_regression(train, target.view(), Some(&train.arm_rows(true)), config, rng)?;
    let tau0 = fit_regression(train, target.view(), Some(&train.arm_rows(false)), config, rng)?;
    CateEstimator::new(Strategy::X, Networks::Blended { tau0, tau1, g: nuisances.pi.clone() }, 0.0, DEFAULT_CLIP)
}

pub fn fit_x_learner(train: &Observed, config: &TrainConfig, rng: &mut Rng) -> Result<CateEstimator> {
    let nuisances = fit_nuisances(train, config, rng)?;
    fit_x_with(train, &nuisances, config, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use ndarray::Array2;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    #[test]
    fn pseudo_outcome_hand_values() {
        assert_eq!(dr_pseudo_outcome(3.0, true, 0.5, 1.0, 2.0, 0.01), 3.0);
        assert_eq!(dr_pseudo_outcome(1.0, false, 0.5, 1.0, 2.0, 0.01), 1.0);
    }

    #[test]
    fn pseudo_outcome_clips_propensity() {
        let clipped = dr_pseudo_outcome(1.0, true, 1e-9, 0.0, 0.0, 0.01);
        assert_eq!(clipped, dr_pseudo_outcome(1.0, true, 0.01, 0.0, 0.0, 0.01));
        assert!(clipped.is_finite());
    }

    /// With the true propensity plugged in, the pseudo-outcome is unbiased
    /// for the ATE whatever the outcome regressions are.
    #[test]
    fn oracle_propensity_unbiasedness() {
        let mut rng = seeded(11);
        let n = 10_000;
        let mut vals = Vec::with_capacity(n);
        let mut true_ate = 0.0;
        for _ in 0..n {
            let x: f64 = rng.sample(StandardNormal);
            let (y0, y1) = (x, x + 1.0 + 0.5 * x);
            true_ate += y1 - y0;
            let treated = rng.random::<f64>() < 0.5;
            let y = if treated { y1 } else { y0 };
            // deliberately wrong regressions
            vals.push(dr_pseudo_outcome(y, treated, 0.5, 0.3 * x - 1.0, 2.0 * x, 0.01));
        }
        true_ate /= n as f64;
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - true_ate).abs() < 3.0 * se, "mean {mean} ate {true_ate} se {se}");
    }

    #[test]
    fn empty_arm_is_rejected() {
        let obs = Observed::new(Array2::zeros((10, 4)), vec![false; 10], Array1::zeros(10)).unwrap();
        let cfg = TrainConfig::default();
        for r in [
            fit_nuisances(&obs, &cfg, &mut seeded(0)).map(|_| ()),
            fit_s_learner(&obs, &cfg, &mut seeded(0)).map(|_| ()),
            fit_t_learner(&obs, &cfg, &mut seeded(0)).map(|_| ()),
            fit_dr_learner(&obs, &cfg, &mut seeded(0)).map(|_| ()),
            fit_x_learner(&obs, &cfg, &mut seeded(0)).map(|_| ()),
        ] {
            assert!(matches!(r, Err(Error::EmptyGroup(_))));
        }
    }

    #[test]
    fn equal_capacity() {
        let net = regression_net(7, Activation::Identity, &mut seeded(0)).unwrap();
        assert_eq!(net.layer_sizes(), vec![7, 100, 100, 1]);
    }
}
