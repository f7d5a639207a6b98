use ndarray::Zip;

use super::Mlp;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments for a bundle of networks that are optimized jointly.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: Vec<Mlp>,
    second: Vec<Mlp>,
    step: u64,
    config: AdamConfig,
}

impl AdamState {
    pub fn new(params: &[Mlp], config: AdamConfig) -> Self {
        Self {
            first: params.iter().map(Mlp::zeros_like).collect(),
            second: params.iter().map(Mlp::zeros_like).collect(),
            step: 0,
            config,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn first_moments(&self) -> &[Mlp] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Mlp] {
        &self.second
    }

    /// One bias-corrected Adam update of `params` in place.
    ///
    /// Nothing is modified when an error is returned.
    pub fn step(&mut self, params: &mut [Mlp], grads: &[Mlp]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::Shape(format!(
                "adam holds {} networks, got {} params and {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (k, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.layer_sizes() != self.first[k].layer_sizes() || g.layer_sizes() != p.layer_sizes() {
                return Err(Error::Shape(format!("network {k}: parameter/gradient shapes differ")));
            }
            if !g.is_finite() {
                return Err(Error::Numeric(format!("network {k}: non-finite gradient")));
            }
        }

        self.step += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: &f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for k in 0..params.len() {
            let layers = params[k].layers_mut().iter_mut();
            let firsts = self.first[k].layers_mut().iter_mut();
            let seconds = self.second[k].layers_mut().iter_mut();
            for (((p, m), v), g) in layers.zip(firsts).zip(seconds).zip(grads[k].layers()) {
                Zip::from(&mut p.weight)
                    .and(&mut m.weight)
                    .and(&mut v.weight)
                    .and(&g.weight)
                    .for_each(update);
                Zip::from(&mut p.bias)
                    .and(&mut m.bias)
                    .and(&mut v.bias)
                    .and(&g.bias)
                    .for_each(update);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use crate::rng::seeded;
    use rand::Rng;

    fn net_and_grad(seed: u64) -> (Mlp, Mlp) {
        let mut rng = seeded(seed);
        let net = Mlp::new(&[3, 4, 1], Activation::Identity, &mut rng).unwrap();
        let mut g = net.zeros_like();
        let vals: Vec<f64> = (0..g.n_params())
            .map(|_| {
                let mag = rng.random_range(0.01..1.0);
                if rng.random_bool(0.5) { mag } else { -mag }
            })
            .collect();
        g.set_flat_params(&vals).unwrap();
        (net, g)
    }

    #[test]
    fn first_step_moves_by_learning_rate_times_sign() {
        let (net, g) = net_and_grad(1);
        let cfg = AdamConfig { learning_rate: 1e-3, ..Default::default() };
        let mut state = AdamState::new(std::slice::from_ref(&net), cfg);
        let mut params = vec![net.clone()];
        state.step(&mut params, std::slice::from_ref(&g)).unwrap();
        assert_eq!(state.step_count(), 1);
        for ((before, after), grad) in net.flat_params().iter().zip(params[0].flat_params()).zip(g.flat_params()) {
            let delta = after - before;
            assert!((delta + 1e-3 * grad.signum()).abs() <= 1e-6 * 1e-3, "delta {delta} grad {grad}");
        }
    }

    #[test]
    fn zero_gradient_leaves_everything_unchanged() {
        let (net, _) = net_and_grad(2);
        let zeros = net.zeros_like();
        let mut state = AdamState::new(std::slice::from_ref(&net), AdamConfig::default());
        let mut params = vec![net.clone()];
        state.step(&mut params, std::slice::from_ref(&zeros)).unwrap();
        assert_eq!(params[0], net);
        assert!(state.first_moments()[0].flat_params().iter().all(|&v| v == 0.0));
        assert!(state.second_moments()[0].flat_params().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic() {
        let (net, g) = net_and_grad(3);
        let state = AdamState::new(std::slice::from_ref(&net), AdamConfig::default());
        let run = || {
            let mut s = state.clone();
            let mut p = vec![net.clone()];
            s.step(&mut p, std::slice::from_ref(&g)).unwrap();
            (s, p)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_rejected_without_mutation() {
        let (net, mut g) = net_and_grad(4);
        g.layers_mut()[0].weight[[0, 0]] = f64::NAN;
        let mut state = AdamState::new(std::slice::from_ref(&net), AdamConfig::default());
        let before = state.clone();
        let mut params = vec![net.clone()];
        assert!(matches!(state.step(&mut params, &[g]), Err(Error::Numeric(_))));
        assert_eq!(state, before);
        assert_eq!(params[0], net);
    }
}
