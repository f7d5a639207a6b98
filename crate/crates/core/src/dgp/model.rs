//! Prognostic/predictive index sets and the outcome functions built on them.

use ndarray::{Array1, ArrayView2};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Disjoint index sets: prognostic covariates and the predictive covariates of
/// each arm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureIndexSets {
    pub prog: Vec<usize>,
    pub pred0: Vec<usize>,
    pub pred1: Vec<usize>,
}

impl FeatureIndexSets {
    pub fn new(prog: Vec<usize>, pred0: Vec<usize>, pred1: Vec<usize>) -> Result<Self> {
        let n = prog.len();
        if n == 0 || pred0.len() != n || pred1.len() != n {
            return Err(Error::InvalidConfig(format!(
                "index sets must share one positive size, got {}, {}, {}",
                prog.len(),
                pred0.len(),
                pred1.len()
            )));
        }
        let mut all: Vec<usize> = prog.iter().chain(&pred0).chain(&pred1).copied().collect();
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("index sets overlap or repeat an index".into()));
        }
        Ok(Self { prog, pred0, pred1 })
    }

    pub fn set_size(&self) -> usize {
        self.prog.len()
    }

    /// `I_0 ⊔ I_1`, sorted.
    pub fn pred(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.pred0.iter().chain(&self.pred1).copied().collect();
        v.sort_unstable();
        v
    }

    /// Every index used by any outcome function, sorted.
    pub fn relevant(&self) -> Vec<usize> {
        let mut v = self.pred();
        v.extend(&self.prog);
        v.sort_unstable();
        v
    }

    pub fn max_index(&self) -> usize {
        self.prog.iter().chain(&self.pred0).chain(&self.pred1).copied().max().unwrap_or(0)
    }
}

/// `⌊0.2 · d⌋`.
pub fn default_set_size(d: usize) -> usize {
    d / 5
}

/// Draws `3 · n_i` distinct indices from `0..d` and splits them in order into
/// the prognostic, control-predictive and treated-predictive sets.
pub fn sample_feature_sets<R: Rng + ?Sized>(d: usize, n_i: usize, rng: &mut R) -> Result<FeatureIndexSets> {
    if n_i == 0 {
        return Err(Error::InvalidConfig("index set size must be at least 1".into()));
    }
    if d <= 3 * n_i {
        return Err(Error::InvalidConfig(format!(
            "need d > 3 · n_i, got d = {d}, n_i = {n_i}"
        )));
    }
    let picked = index::sample(rng, d, 3 * n_i).into_vec();
    FeatureIndexSets::new(
        picked[..n_i].to_vec(),
        picked[n_i..2 * n_i].to_vec(),
        picked[2 * n_i..].to_vec(),
    )
}

/// The ten scalar nonlinearities outcome functions may be built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    Abs,
    ExpNegSquare,
    InverseOnePlusSquare,
    Cos,
    Sin,
    Arctan,
    Tanh,
    LogOnePlusSquare,
    SqrtOnePlusSquare,
    Cosh,
}

impl Nonlinearity {
    pub const ALL: [Nonlinearity; 10] = [
        Nonlinearity::Abs,
        Nonlinearity::ExpNegSquare,
        Nonlinearity::InverseOnePlusSquare,
        Nonlinearity::Cos,
        Nonlinearity::Sin,
        Nonlinearity::Arctan,
        Nonlinearity::Tanh,
        Nonlinearity::LogOnePlusSquare,
        Nonlinearity::SqrtOnePlusSquare,
        Nonlinearity::Cosh,
    ];

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Nonlinearity::Abs => x.abs(),
            Nonlinearity::ExpNegSquare => (-x * x).exp(),
            Nonlinearity::InverseOnePlusSquare => 1.0 / (1.0 + x * x),
            Nonlinearity::Cos => x.cos(),
            Nonlinearity::Sin => x.sin(),
            Nonlinearity::Arctan => x.atan(),
            Nonlinearity::Tanh => x.tanh(),
            Nonlinearity::LogOnePlusSquare => (x * x).ln_1p(),
            Nonlinearity::SqrtOnePlusSquare => (1.0 + x * x).sqrt(),
            Nonlinearity::Cosh => x.cosh(),
        }
    }

    /// Derivative of [`Nonlinearity::apply`]; `abs` uses 0 at the kink.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Nonlinearity::Abs => {
                if x == 0.0 {
                    0.0
                } else {
                    x.signum()
                }
            }
            Nonlinearity::ExpNegSquare => -2.0 * x * (-x * x).exp(),
            Nonlinearity::InverseOnePlusSquare => -2.0 * x / (1.0 + x * x).powi(2),
            Nonlinearity::Cos => -x.sin(),
            Nonlinearity::Sin => x.cos(),
            Nonlinearity::Arctan => 1.0 / (1.0 + x * x),
            Nonlinearity::Tanh => 1.0 - x.tanh().powi(2),
            Nonlinearity::LogOnePlusSquare => 2.0 * x / (1.0 + x * x),
            Nonlinearity::SqrtOnePlusSquare => x / (1.0 + x * x).sqrt(),
            Nonlinearity::Cosh => x.sinh(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Nonlinearity::Abs => "abs",
            Nonlinearity::ExpNegSquare => "exp_neg_square",
            Nonlinearity::InverseOnePlusSquare => "inverse_one_plus_square",
            Nonlinearity::Cos => "cos",
            Nonlinearity::Sin => "sin",
            Nonlinearity::Arctan => "arctan",
            Nonlinearity::Tanh => "tanh",
            Nonlinearity::LogOnePlusSquare => "log_one_plus_square",
            Nonlinearity::SqrtOnePlusSquare => "sqrt_one_plus_square",
            Nonlinearity::Cosh => "cosh",
        }
    }

    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::ALL[rng.random_range(0..Self::ALL.len())]
    }
}

/// Weights, nonlinearity and scales of the outcome functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub alpha_prog: Vec<f64>,
    pub alpha0: Vec<f64>,
    pub alpha1: Vec<f64>,
    pub chi: Nonlinearity,
    pub omega_nl: f64,
    pub omega_pred: f64,
}

/// Values of the three outcome components at one unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Components {
    pub mu_prog: f64,
    pub f0: f64,
    pub f1: f64,
}

impl OutcomeModel {
    pub fn new(
        alpha_prog: Vec<f64>,
        alpha0: Vec<f64>,
        alpha1: Vec<f64>,
        chi: Nonlinearity,
        omega_nl: f64,
        omega_pred: f64,
    ) -> Result<Self> {
        check_scales(omega_nl, omega_pred)?;
        let n = alpha_prog.len();
        if alpha0.len() != n || alpha1.len() != n {
            return Err(Error::Shape("weight vectors differ in length".into()));
        }
        if alpha_prog.iter().chain(&alpha0).chain(&alpha1).any(|a| !(-1.0..=1.0).contains(a)) {
            return Err(Error::InvalidConfig("weights must lie in [-1, 1]".into()));
        }
        Ok(Self { alpha_prog, alpha0, alpha1, chi, omega_nl, omega_pred })
    }

    pub fn set_size(&self) -> usize {
        self.alpha_prog.len()
    }

    /// `(1 - ω_nl) · s + ω_nl · χ(s)`.
    pub fn blend(&self, s: f64) -> f64 {
        if self.omega_nl == 0.0 {
            s
        } else {
            (1.0 - self.omega_nl) * s + self.omega_nl * self.chi.apply(s)
        }
    }

    pub fn blend_derivative(&self, s: f64) -> f64 {
        if self.omega_nl == 0.0 {
            1.0
        } else {
            (1.0 - self.omega_nl) + self.omega_nl * self.chi.derivative(s)
        }
    }

    pub fn with_scales(&self, omega_nl: f64, omega_pred: f64) -> Result<Self> {
        check_scales(omega_nl, omega_pred)?;
        Ok(Self { omega_nl, omega_pred, ..self.clone() })
    }
}

fn check_scales(omega_nl: f64, omega_pred: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&omega_nl) {
        return Err(Error::InvalidConfig(format!("nonlinearity scale must lie in [0, 1], got {omega_nl}")));
    }
    if !(omega_pred.is_finite() && omega_pred >= 0.0) {
        return Err(Error::InvalidConfig(format!("predictive scale must be >= 0, got {omega_pred}")));
    }
    Ok(())
}

/// Weights uniform on `[-1, 1]^n_i`.
pub fn sample_weights<R: Rng + ?Sized>(n_i: usize, rng: &mut R) -> Vec<f64> {
    (0..n_i).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Three independent weight vectors and one nonlinearity shared by all three
/// functions.
pub fn sample_outcome_model<R: Rng + ?Sized>(
    n_i: usize,
    omega_nl: f64,
    omega_pred: f64,
    rng: &mut R,
) -> Result<OutcomeModel> {
    check_scales(omega_nl, omega_pred)?;
    let alpha_prog = sample_weights(n_i, rng);
    let alpha0 = sample_weights(n_i, rng);
    let alpha1 = sample_weights(n_i, rng);
    let chi = Nonlinearity::sample(rng);
    OutcomeModel::new(alpha_prog, alpha0, alpha1, chi, omega_nl, omega_pred)
}

fn check_sets(model: &OutcomeModel, sets: &FeatureIndexSets, d: usize) -> Result<()> {
    if sets.set_size() != model.set_size() {
        return Err(Error::Shape(format!(
            "index sets of size {} but weights of length {}",
            sets.set_size(),
            model.set_size()
        )));
    }
    if sets.max_index() >= d {
        return Err(Error::Shape(format!(
            "index {} out of range for {d} features",
            sets.max_index()
        )));
    }
    Ok(())
}

fn dot_on(alpha: &[f64], idx: &[usize], x: impl Fn(usize) -> f64) -> f64 {
    alpha.iter().zip(idx).map(|(a, &i)| a * x(i)).sum()
}

/// Evaluates `μ_prog`, `f_pred,0`, `f_pred,1` at one unit.
pub fn eval_components(model: &OutcomeModel, sets: &FeatureIndexSets, x: &[f64]) -> Result<Components> {
    check_sets(model, sets, x.len())?;
    let at = |i: usize| x[i];
    Ok(Components {
        mu_prog: model.blend(dot_on(&model.alpha_prog, &sets.prog, at)),
        f0: model.blend(dot_on(&model.alpha0, &sets.pred0, at)),
        f1: model.blend(dot_on(&model.alpha1, &sets.pred1, at)),
    })
}

/// Row-wise [`eval_components`] over a matrix: `(μ_prog, f0, f1)`.
pub fn eval_components_batch(
    model: &OutcomeModel,
    sets: &FeatureIndexSets,
    x: ArrayView2<f64>,
) -> Result<(Array1<f64>, Array1<f64>, Array1<f64>)> {
    check_sets(model, sets, x.ncols())?;
    let n = x.nrows();
    let (mut mu, mut f0, mut f1) = (Array1::zeros(n), Array1::zeros(n), Array1::zeros(n));
    for (r, row) in x.rows().into_iter().enumerate() {
        let at = |i: usize| row[i];
        mu[r] = model.blend(dot_on(&model.alpha_prog, &sets.prog, at));
        f0[r] = model.blend(dot_on(&model.alpha0, &sets.pred0, at));
        f1[r] = model.blend(dot_on(&model.alpha1, &sets.pred1, at));
    }
    Ok((mu, f0, f1))
}

/// The true effect `τ(x) = y1(x) − y0(x)` as a function, with its exact
/// gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueCate {
    model: OutcomeModel,
    sets: FeatureIndexSets,
    d: usize,
}

impl TrueCate {
    pub fn new(model: OutcomeModel, sets: FeatureIndexSets, d: usize) -> Result<Self> {
        check_sets(&model, &sets, d)?;
        Ok(Self { model, sets, d })
    }

    pub fn n_features(&self) -> usize {
        self.d
    }

    fn check(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.d {
            return Err(Error::Shape(format!("input has {} columns, expected {}", x.ncols(), self.d)));
        }
        Ok(())
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.check(&x)?;
        let (mu, f0, f1) = eval_components_batch(&self.model, &self.sets, x)?;
        let w = self.model.omega_pred;
        Ok(&(&mu + &(&f1 * w)) - &(&mu + &(&f0 * w)))
    }

    pub fn gradient(&self, x: ArrayView2<f64>) -> Result<ndarray::Array2<f64>> {
        self.check(&x)?;
        let m = &self.model;
        let mut out = ndarray::Array2::zeros(x.dim());
        for (r, row) in x.rows().into_iter().enumerate() {
            let at = |i: usize| row[i];
            let s0 = dot_on(&m.alpha0, &self.sets.pred0, at);
            let s1 = dot_on(&m.alpha1, &self.sets.pred1, at);
            let (g0, g1) = (m.blend_derivative(s0), m.blend_derivative(s1));
            for (a, &i) in m.alpha1.iter().zip(&self.sets.pred1) {
                out[[r, i]] += m.omega_pred * g1 * a;
            }
            for (a, &i) in m.alpha0.iter().zip(&self.sets.pred0) {
                out[[r, i]] -= m.omega_pred * g0 * a;
            }
        }
        Ok(out)
    }
}
