//! Minibatch Adam with early stopping on a held-out validation split.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{AdamConfig, AdamState, Activation, Mlp};
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub validation_fraction: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 1024,
            validation_fraction: 0.30,
            max_epochs: 1000,
            patience: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "validation fraction must lie in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidConfig("patience must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidConfig("max epochs must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    SquaredError,
    /// Requires a sigmoid output; the gradient is taken w.r.t. the logit.
    BinaryCrossEntropy,
}

/// A differentiable training objective over a bundle of networks.
pub trait Objective {
    fn n_samples(&self) -> usize;

    /// Mean loss over `rows` and its gradient w.r.t. every network.
    fn loss_and_grad(&self, nets: &[Mlp], rows: &[usize]) -> Result<(f64, Vec<Mlp>)>;

    /// Mean loss over `rows`, used for validation.
    fn loss(&self, nets: &[Mlp], rows: &[usize]) -> Result<f64>;
}

/// An additive regularizer. Only applied to training minibatches, never to
/// the validation loss.
pub trait Penalty {
    fn penalty(&self, nets: &[Mlp], rows: &[usize]) -> Result<(f64, Vec<Mlp>)>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub epochs_run: usize,
    /// 1-based epoch whose snapshot was returned.
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    pub validation_history: Vec<f64>,
}

/// Trains `nets` jointly and returns the snapshot with the lowest validation
/// loss seen after any epoch.
pub fn train_early_stop(
    nets: Vec<Mlp>,
    objective: &dyn Objective,
    penalty: Option<&dyn Penalty>,
    config: &TrainConfig,
    rng: &mut Rng,
) -> Result<(Vec<Mlp>, FitReport)> {
    config.validate()?;
    let n = objective.n_samples();
    let n_val = (n as f64 * config.validation_fraction).round() as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::InvalidConfig(format!(
            "validation split of {n} samples at fraction {} leaves an empty part",
            config.validation_fraction
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let (val_rows, train_rows) = order.split_at(n_val);
    let mut train_rows = train_rows.to_vec();
    let val_rows = val_rows.to_vec();

    let mut params = nets;
    let mut adam = AdamState::new(
        &params,
        AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut best: Option<(f64, usize, Vec<Mlp>)> = None;
    let mut history = Vec::new();
    let mut since_best = 0;

    for epoch in 1..=config.max_epochs {
        train_rows.shuffle(rng);
        for batch in train_rows.chunks(config.batch_size) {
            let (_, mut grads) = objective.loss_and_grad(&params, batch)?;
            if let Some(p) = penalty {
                let (_, pg) = p.penalty(&params, batch)?;
                for (g, extra) in grads.iter_mut().zip(&pg) {
                    g.add_scaled(extra, 1.0);
                }
            }
            adam.step(&mut params, &grads)?;
        }
        let val = objective.loss(&params, &val_rows)?;
        history.push(val);
        let improved = val.is_finite() && best.as_ref().is_none_or(|(b, _, _)| val < *b);
        if improved {
            best = Some((val, epoch, params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }

    let epochs_run = history.len();
    let (best_loss, best_epoch, snapshot) = best.ok_or_else(|| {
        Error::Numeric("validation loss was never finite during training".into())
    })?;
    Ok((
        snapshot,
        FitReport {
            epochs_run,
            best_epoch,
            best_validation_loss: best_loss,
            validation_history: history,
        },
    ))
}

/// Single-network supervised regression or classification.
#[derive(Debug, Clone, Copy)]
pub struct Supervised<'a> {
    x: ArrayView2<'a, f64>,
    target: ArrayView1<'a, f64>,
    weight: Option<ArrayView1<'a, f64>>,
    loss: Loss,
}

impl<'a> Supervised<'a> {
    pub fn new(
        x: ArrayView2<'a, f64>,
        target: ArrayView1<'a, f64>,
        weight: Option<ArrayView1<'a, f64>>,
        loss: Loss,
    ) -> Result<Self> {
        if target.len() != x.nrows() {
            return Err(Error::Shape(format!(
                "{} targets for {} rows",
                target.len(),
                x.nrows()
            )));
        }
        if let Some(w) = weight {
            if w.len() != x.nrows() {
                return Err(Error::Shape(format!("{} weights for {} rows", w.len(), x.nrows())));
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidConfig("sample weights must be finite and non-negative".into()));
            }
        }
        if target.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite training target".into()));
        }
        if loss == Loss::BinaryCrossEntropy && target.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidConfig("cross-entropy targets must lie in [0, 1]".into()));
        }
        Ok(Self { x, target, weight, loss })
    }

    fn weights(&self, rows: &[usize]) -> (Vec<f64>, f64) {
        let w: Vec<f64> = match self.weight {
            Some(w) => rows.iter().map(|&r| w[r]).collect(),
            None => vec![1.0; rows.len()],
        };
        let total = w.iter().sum::<f64>();
        (w, total)
    }

    /// Per-row loss and derivative w.r.t. the output (squared error) or the
    /// logit (cross-entropy).
    fn pointwise(&self, out: f64, target: f64) -> (f64, f64) {
        match self.loss {
            Loss::SquaredError => {
                let e = out - target;
                (e * e, 2.0 * e)
            }
            Loss::BinaryCrossEntropy => {
                let p = out.clamp(1e-12, 1.0 - 1e-12);
                let l = -(target * p.ln() + (1.0 - target) * (1.0 - p).ln());
                (l, out - target)
            }
        }
    }

    fn check_net(&self, nets: &[Mlp]) -> Result<()> {
        if nets.len() != 1 || nets[0].output_dim() != 1 {
            return Err(Error::Shape("supervised objective trains one scalar-output network".into()));
        }
        if self.loss == Loss::BinaryCrossEntropy && nets[0].output_activation() != Activation::Sigmoid {
            return Err(Error::InvalidConfig("cross-entropy requires a sigmoid output".into()));
        }
        Ok(())
    }
}

impl Objective for Supervised<'_> {
    fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    fn loss_and_grad(&self, nets: &[Mlp], rows: &[usize]) -> Result<(f64, Vec<Mlp>)> {
        self.check_net(nets)?;
        let net = &nets[0];
        let xb = self.x.select(Axis(0), rows);
        let tape = net.forward_tape(xb.view())?;
        let (w, total) = self.weights(rows);
        if total <= 0.0 {
            return Ok((0.0, vec![net.zeros_like()]));
        }
        let mut loss = 0.0;
        let mut grad = Array2::zeros((rows.len(), 1));
        for (k, &r) in rows.iter().enumerate() {
            let (l, d) = self.pointwise(tape.output()[[k, 0]], self.target[r]);
            loss += w[k] * l;
            grad[[k, 0]] = w[k] * d / total;
        }
        let (g, _) = match self.loss {
            Loss::SquaredError => net.backward(&tape, grad.view())?,
            Loss::BinaryCrossEntropy => net.backward_from_logits(&tape, grad.view())?,
        };
        Ok((loss / total, vec![g]))
    }

    fn loss(&self, nets: &[Mlp], rows: &[usize]) -> Result<f64> {
        self.check_net(nets)?;
        let xb = self.x.select(Axis(0), rows);
        let out = nets[0].forward(xb.view())?;
        let (w, total) = self.weights(rows);
        if total <= 0.0 {
            return Ok(0.0);
        }
        let sum: f64 = rows
            .iter()
            .enumerate()
            .map(|(k, &r)| w[k] * self.pointwise(out[[k, 0]], self.target[r]).0)
            .sum();
        Ok(sum / total)
    }
}

/// Fits one network on `(x, target)` with early stopping.
pub fn fit_network(
    net: Mlp,
    x: ArrayView2<f64>,
    target: ArrayView1<f64>,
    weight: Option<ArrayView1<f64>>,
    loss: Loss,
    config: &TrainConfig,
    rng: &mut Rng,
) -> Result<(Mlp, FitReport)> {
    let objective = Supervised::new(x, target, weight, loss)?;
    let (mut nets, report) = train_early_stop(vec![net], &objective, None, config, rng)?;
    Ok((nets.pop().expect("one network"), report))
}
