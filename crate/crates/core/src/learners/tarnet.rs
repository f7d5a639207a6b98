//! Shared-representation learners: TARNet and its balanced variant CFRNet.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use super::estimator::{CateEstimator, Networks, Strategy};
use super::fit::{DEFAULT_CLIP, HIDDEN};
use crate::dgp::Observed;
use crate::nn::{mmd2_linear_with_grad, train_early_stop, Activation, Mlp, Objective, Penalty, TrainConfig};
use crate::rng::Rng;
use crate::{Error, Result};

/// The representation `Φ: d → 100` with a ReLU output.
pub fn representation_net(d: usize, rng: &mut Rng) -> Result<Mlp> {
    Mlp::new(&[d, HIDDEN], Activation::Relu, rng)
}

fn head_net(rng: &mut Rng) -> Result<Mlp> {
    Mlp::new(&[HIDDEN, HIDDEN, 1], Activation::Identity, rng)
}

fn split_arms(treated: &[bool], rows: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut arms = (Vec::new(), Vec::new());
    for (k, &r) in rows.iter().enumerate() {
        if treated[r] { arms.1.push(k) } else { arms.0.push(k) }
    }
    arms
}

fn check_nets(nets: &[Mlp]) -> Result<()> {
    if nets.len() != 3 {
        return Err(Error::Shape(format!("expected trunk and two heads, got {} networks", nets.len())));
    }
    Ok(())
}

/// Mean squared error of the head matching each unit's observed arm, over
/// `[trunk, head0, head1]`.
#[derive(Debug, Clone, Copy)]
pub struct FactualObjective<'a> {
    x: ArrayView2<'a, f64>,
    treated: &'a [bool],
    y: ArrayView1<'a, f64>,
}

impl<'a> FactualObjective<'a> {
    pub fn new(train: &'a Observed) -> Self {
        Self { x: train.x().view(), treated: train.treated(), y: train.y().view() }
    }
}

impl Objective for FactualObjective<'_> {
    fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    fn loss_and_grad(&self, nets: &[Mlp], rows: &[usize]) -> Result<(f64, Vec<Mlp>)> {
        check_nets(nets)?;
        let nb = rows.len() as f64;
        let xb = self.x.select(Axis(0), rows);
        let tape = nets[0].forward_tape(xb.view())?;
        let phi = tape.output();
        let mut dphi = Array2::zeros(phi.dim());
        let mut loss = 0.0;
        let mut head_grads = Vec::with_capacity(2);
        let (idx0, idx1) = split_arms(self.treated, rows);
        for (head, idx) in [(&nets[1], &idx0), (&nets[2], &idx1)] {
            if idx.is_empty() {
                head_grads.push(head.zeros_like());
                continue;
            }
            let phi_w = phi.select(Axis(0), idx);
            let htape = head.forward_tape(phi_w.view())?;
            let mut g = Array2::zeros((idx.len(), 1));
            for (j, &k) in idx.iter().enumerate() {
                let e = htape.output()[[j, 0]] - self.y[rows[k]];
                loss += e * e;
                g[[j, 0]] = 2.0 * e / nb;
            }
            let (hg, dphi_w) = head.backward(&htape, g.view())?;
            for (j, &k) in idx.iter().enumerate() {
                dphi.row_mut(k).assign(&dphi_w.row(j));
            }
            head_grads.push(hg);
        }
        let (tg, _) = nets[0].backward(&tape, dphi.view())?;
        let mut grads = vec![tg];
        grads.extend(head_grads);
        Ok((loss / nb, grads))
    }

    fn loss(&self, nets: &[Mlp], rows: &[usize]) -> Result<f64> {
        check_nets(nets)?;
        let xb = self.x.select(Axis(0), rows);
        let phi = nets[0].forward(xb.view())?;
        let (p0, p1) = (nets[1].predict(phi.view())?, nets[2].predict(phi.view())?);
        let sum: f64 = rows
            .iter()
            .enumerate()
            .map(|(k, &r)| {
                let pred = if self.treated[r] { p1[k] } else { p0[k] };
                (pred - self.y[r]).powi(2)
            })
            .sum();
        Ok(sum / rows.len() as f64)
    }
}

/// `γ · MMD²_lin(Φ(controls), Φ(treated))` on each minibatch. A batch
/// holding only one arm contributes nothing.
#[derive(Debug, Clone, Copy)]
pub struct MmdPenalty<'a> {
    x: ArrayView2<'a, f64>,
    treated: &'a [bool],
    gamma: f64,
}

impl<'a> MmdPenalty<'a> {
    pub fn new(train: &'a Observed, gamma: f64) -> Self {
        Self { x: train.x().view(), treated: train.treated(), gamma }
    }
}

impl Penalty for MmdPenalty<'_> {
    fn penalty(&self, nets: &[Mlp], rows: &[usize]) -> Result<(f64, Vec<Mlp>)> {
        check_nets(nets)?;
        let zeros = || nets.iter().map(Mlp::zeros_like).collect::<Vec<_>>();
        let (idx0, idx1) = split_arms(self.treated, rows);
        if idx0.is_empty() || idx1.is_empty() || self.gamma == 0.0 {
            return Ok((0.0, zeros()));
        }
        let xb = self.x.select(Axis(0), rows);
        let tape = nets[0].forward_tape(xb.view())?;
        let phi = tape.output();
        let (value, g0, g1) =
            mmd2_linear_with_grad(phi.select(Axis(0), &idx0).view(), phi.select(Axis(0), &idx1).view())?;
        let mut dphi = Array2::zeros(phi.dim());
        for (j, &k) in idx0.iter().enumerate() {
            dphi.row_mut(k).assign(&(&g0.row(j) * self.gamma));
        }
        for (j, &k) in idx1.iter().enumerate() {
            dphi.row_mut(k).assign(&(&g1.row(j) * self.gamma));
        }
        let (tg, _) = nets[0].backward(&tape, dphi.view())?;
        let mut grads = zeros();
        grads[0] = tg;
        Ok((self.gamma * value, grads))
    }
}

/// TARNet when `gamma == 0`, CFRNet otherwise.
pub fn fit_tarnet(train: &Observed, gamma: f64, config: &TrainConfig, rng: &mut Rng) -> Result<CateEstimator> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::InvalidConfig(format!("gamma must be >= 0, got {gamma}")));
    }
    train.require_both_arms()?;
    let trunk = representation_net(train.n_features(), rng)?;
    let head0 = head_net(rng)?;
    let head1 = head_net(rng)?;
    let objective = FactualObjective::new(train);
    let penalty = MmdPenalty::new(train, gamma);
    let penalty: Option<&dyn Penalty> = if gamma > 0.0 { Some(&penalty) } else { None };
    let (mut nets, _) = train_early_stop(vec![trunk, head0, head1], &objective, penalty, config, rng)?;
    let head1 = nets.pop().expect("three networks");
    let head0 = nets.pop().expect("three networks");
    let trunk = nets.pop().expect("three networks");
    let strategy = if gamma > 0.0 { Strategy::Cfrnet } else { Strategy::Tarnet };
    CateEstimator::new(strategy, Networks::Representation { trunk, head0, head1 }, gamma, DEFAULT_CLIP)
}
