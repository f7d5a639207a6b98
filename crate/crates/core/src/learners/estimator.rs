use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::nn::{Activation, Mlp};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    S,
    T,
    Tarnet,
    Cfrnet,
    Dr,
    X,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [Self::S, Self::T, Self::Tarnet, Self::Cfrnet, Self::Dr, Self::X];

    pub fn name(self) -> &'static str {
        match self {
            Self::S => "s",
            Self::T => "t",
            Self::Tarnet => "tarnet",
            Self::Cfrnet => "cfrnet",
            Self::Dr => "dr",
            Self::X => "x",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name().eq_ignore_ascii_case(name))
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Fitted parameters, one variant per network layout.
#[derive(Debug, Clone, PartialEq)]
pub enum Networks {
    /// `μ̂(x, w)` with the treatment indicator as the last input.
    Single { net: Mlp },
    TwoModels { mu0: Mlp, mu1: Mlp },
    Representation { trunk: Mlp, head0: Mlp, head1: Mlp },
    /// A direct regression of the effect on `x`.
    Direct { tau: Mlp },
    /// `g τ̂₁ + (1 − g) τ̂₀` with `g` a sigmoid-output network.
    Blended { tau0: Mlp, tau1: Mlp, g: Mlp },
}

impl Networks {
    /// Networks in a fixed order with their role names.
    pub fn named(&self) -> Vec<(&'static str, &Mlp)> {
        match self {
            Self::Single { net } => vec![("mu", net)],
            Self::TwoModels { mu0, mu1 } => vec![("mu0", mu0), ("mu1", mu1)],
            Self::Representation { trunk, head0, head1 } => {
                vec![("trunk", trunk), ("head0", head0), ("head1", head1)]
            }
            Self::Direct { tau } => vec![("tau", tau)],
            Self::Blended { tau0, tau1, g } => vec![("tau0", tau0), ("tau1", tau1), ("g", g)],
        }
    }
}

/// A fitted CATE estimator. Immutable once built; prediction is a pure
/// function of the query matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CateEstimator {
    strategy: Strategy,
    networks: Networks,
    gamma: f64,
    clip: f64,
    seed: Option<u64>,
    d: usize,
}

fn scalar(net: &Mlp, what: &str) -> Result<()> {
    if net.output_dim() != 1 {
        return Err(Error::Shape(format!("{what} must have one output, has {}", net.output_dim())));
    }
    Ok(())
}

fn same_input(nets: &[&Mlp]) -> Result<usize> {
    let d = nets[0].input_dim();
    if nets.iter().any(|n| n.input_dim() != d) {
        return Err(Error::Shape("networks disagree on the input dimension".into()));
    }
    Ok(d)
}

impl CateEstimator {
    /// Assembles an estimator from networks, checking that their shapes fit
    /// the strategy.
    pub fn new(strategy: Strategy, networks: Networks, gamma: f64, clip: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::InvalidConfig(format!("gamma must be >= 0, got {gamma}")));
        }
        if !(clip > 0.0 && clip < 0.5) {
            return Err(Error::InvalidConfig(format!("clip must lie in (0, 0.5), got {clip}")));
        }
        let d = match (&networks, strategy) {
            (Networks::Single { net }, Strategy::S) => {
                scalar(net, "the outcome network")?;
                if net.input_dim() < 2 {
                    return Err(Error::Shape("the outcome network needs covariates plus the treatment".into()));
                }
                net.input_dim() - 1
            }
            (Networks::TwoModels { mu0, mu1 }, Strategy::T) => {
                scalar(mu0, "mu0")?;
                scalar(mu1, "mu1")?;
                same_input(&[mu0, mu1])?
            }
            (Networks::Representation { trunk, head0, head1 }, Strategy::Tarnet | Strategy::Cfrnet) => {
                scalar(head0, "head0")?;
                scalar(head1, "head1")?;
                if head0.input_dim() != trunk.output_dim() || head1.input_dim() != trunk.output_dim() {
                    return Err(Error::Shape("heads must read the representation".into()));
                }
                trunk.input_dim()
            }
            (Networks::Direct { tau }, Strategy::Dr) => {
                scalar(tau, "tau")?;
                tau.input_dim()
            }
            (Networks::Blended { tau0, tau1, g }, Strategy::X) => {
                scalar(tau0, "tau0")?;
                scalar(tau1, "tau1")?;
                scalar(g, "g")?;
                if g.output_activation() != Activation::Sigmoid {
                    return Err(Error::InvalidConfig("the blending network needs a sigmoid output".into()));
                }
                same_input(&[tau0, tau1, g])?
            }
            (_, s) => return Err(Error::InvalidConfig(format!("network layout does not match strategy {s}"))),
        };
        if strategy == Strategy::Tarnet && gamma != 0.0 {
            return Err(Error::InvalidConfig("TARNet has gamma = 0; use CFRNet".into()));
        }
        Ok(Self { strategy, networks, gamma, clip, seed: None, d })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn networks(&self) -> &Networks {
        &self.networks
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn clip(&self) -> f64 {
        self.clip
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn n_features(&self) -> usize {
        self.d
    }

    fn check(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.d {
            return Err(Error::Shape(format!("query has {} columns, estimator expects {}", x.ncols(), self.d)));
        }
        Ok(())
    }

    /// `τ̂(x)` for every row of `x`.
    pub fn predict_cate(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.check(&x)?;
        match &self.networks {
            Networks::Single { net } => {
                let (x0, x1) = with_treatment(x);
                Ok(net.predict(x1.view())? - net.predict(x0.view())?)
            }
            Networks::TwoModels { mu0, mu1 } => Ok(mu1.predict(x)? - mu0.predict(x)?),
            Networks::Representation { trunk, head0, head1 } => {
                let phi = trunk.forward(x)?;
                Ok(head1.predict(phi.view())? - head0.predict(phi.view())?)
            }
            Networks::Direct { tau } => tau.predict(x),
            Networks::Blended { tau0, tau1, g } => {
                let (t0, t1, g) = (tau0.predict(x)?, tau1.predict(x)?, g.predict(x)?);
                Ok(&g * &t1 + &(1.0 - &g) * &t0)
            }
        }
    }

    /// Row-wise gradient of `τ̂` with respect to the covariates.
    pub fn cate_input_gradients(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(&x)?;
        match &self.networks {
            Networks::Single { net } => {
                let (x0, x1) = with_treatment(x);
                let g = net.input_gradient(x1.view())? - net.input_gradient(x0.view())?;
                Ok(g.slice(s![.., ..self.d]).to_owned())
            }
            Networks::TwoModels { mu0, mu1 } => Ok(mu1.input_gradient(x)? - mu0.input_gradient(x)?),
            Networks::Representation { trunk, head0, head1 } => {
                let tape = trunk.forward_tape(x)?;
                let phi = tape.output();
                let dphi = head1.input_gradient(phi.view())? - head0.input_gradient(phi.view())?;
                trunk.input_backward(&tape, dphi.view())
            }
            Networks::Direct { tau } => tau.input_gradient(x),
            Networks::Blended { tau0, tau1, g } => {
                let (t0, t1, gv) = (tau0.predict(x)?, tau1.predict(x)?, g.predict(x)?);
                let (d0, d1, dg) = (tau0.input_gradient(x)?, tau1.input_gradient(x)?, g.input_gradient(x)?);
                let gv = gv.insert_axis(Axis(1));
                let diff = (&t1 - &t0).insert_axis(Axis(1));
                Ok(&d1 * &gv + &d0 * &(1.0 - &gv) + &dg * &diff)
            }
        }
    }

    /// Gradient of `τ̂` at a single point.
    pub fn cate_input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let row = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::Shape(e.to_string()))?;
        Ok(self.cate_input_gradients(row)?.row(0).to_vec())
    }
}

/// `x` with a treatment column of zeros and of ones appended.
fn with_treatment(x: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
    let n = x.nrows();
    let x0 = concatenate![Axis(1), x, Array2::zeros((n, 1))];
    let x1 = concatenate![Axis(1), x, Array2::ones((n, 1))];
    (x0, x1)
}
