//! Dataset generation with sealed ground truth.

use ndarray::{Array1, Array2, Axis};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::covariates::CovariateMatrix;
use super::model::{
    default_set_size, eval_components_batch, sample_feature_sets, sample_weights, FeatureIndexSets, Nonlinearity,
    OutcomeModel, TrueCate,
};
use super::propensity::{propensity_scores, PropensityKind, PropensitySpec, ZScoreStats};
use crate::rng::{Stream, Streams};
use crate::{Error, Result};

/// What an estimator is allowed to see: covariates, assignments, outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct Observed {
    x: Array2<f64>,
    treated: Vec<bool>,
    y: Array1<f64>,
}

impl Observed {
    pub fn new(x: Array2<f64>, treated: Vec<bool>, y: Array1<f64>) -> Result<Self> {
        if treated.len() != x.nrows() || y.len() != x.nrows() {
            return Err(Error::Shape(format!(
                "{} units but {} assignments and {} outcomes",
                x.nrows(),
                treated.len(),
                y.len()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("observed data contain non-finite values".into()));
        }
        Ok(Self { x, treated, y })
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn treated(&self) -> &[bool] {
        &self.treated
    }

    /// Assignments as 0.0 / 1.0.
    pub fn w(&self) -> Array1<f64> {
        self.treated.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect()
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn n_units(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn arm_rows(&self, treated: bool) -> Vec<usize> {
        (0..self.n_units()).filter(|&i| self.treated[i] == treated).collect()
    }

    /// Errors unless both arms contain at least one unit.
    pub fn require_both_arms(&self) -> Result<()> {
        let n1 = self.treated.iter().filter(|&&t| t).count();
        if n1 == 0 {
            return Err(Error::EmptyGroup("no treated units".into()));
        }
        if n1 == self.n_units() {
            return Err(Error::EmptyGroup("no control units".into()));
        }
        Ok(())
    }

    pub fn subset(&self, rows: &[usize]) -> Observed {
        Observed {
            x: self.x.select(Axis(0), rows),
            treated: rows.iter().map(|&r| self.treated[r]).collect(),
            y: self.y.select(Axis(0), rows),
        }
    }
}

/// Everything the generator knows that estimators must not see.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub y0: Array1<f64>,
    pub y1: Array1<f64>,
    pub tau: Array1<f64>,
    pub pi: Array1<f64>,
    pub sets: FeatureIndexSets,
    pub model: OutcomeModel,
    pub propensity: PropensitySpec,
    pub zscore: Option<ZScoreStats>,
    pub sigma: f64,
}

impl GroundTruth {
    /// The true effect function over `d` covariates.
    pub fn oracle(&self, d: usize) -> Result<TrueCate> {
        TrueCate::new(self.model.clone(), self.sets.clone(), d)
    }

    fn subset(&self, rows: &[usize]) -> GroundTruth {
        GroundTruth {
            y0: self.y0.select(Axis(0), rows),
            y1: self.y1.select(Axis(0), rows),
            tau: self.tau.select(Axis(0), rows),
            pi: self.pi.select(Axis(0), rows),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemiSyntheticDataset {
    unit_ids: Vec<usize>,
    names: Vec<String>,
    observed: Observed,
    truth: GroundTruth,
}

impl SemiSyntheticDataset {
    pub fn observed(&self) -> &Observed {
        &self.observed
    }

    /// Separate access path for scoring; never handed to estimators.
    pub fn ground_truth(&self) -> &GroundTruth {
        &self.truth
    }

    /// Row identifiers in the originally generated dataset.
    pub fn unit_ids(&self) -> &[usize] {
        &self.unit_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.names
    }

    pub fn n_units(&self) -> usize {
        self.observed.n_units()
    }

    pub fn subset(&self, rows: &[usize]) -> SemiSyntheticDataset {
        SemiSyntheticDataset {
            unit_ids: rows.iter().map(|&r| self.unit_ids[r]).collect(),
            names: self.names.clone(),
            observed: self.observed.subset(rows),
            truth: self.truth.subset(rows),
        }
    }
}

/// Potential outcomes, assignments and observed outcomes for every unit.
///
/// The propensity z-score is fitted on all units of `covariates`.
/// Assignment uniforms come from [`Stream::Assignment`], noise from
/// [`Stream::Noise`].
pub fn generate_dataset(
    covariates: &CovariateMatrix,
    sets: &FeatureIndexSets,
    model: &OutcomeModel,
    propensity: &PropensitySpec,
    sigma: f64,
    streams: &Streams,
) -> Result<SemiSyntheticDataset> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidConfig(format!("noise level must be >= 0, got {sigma}")));
    }
    let x = covariates.values();
    let (mu, f0, f1) = eval_components_batch(model, sets, x.view())?;
    let y0 = &mu + &(&f0 * model.omega_pred);
    let y1 = &mu + &(&f1 * model.omega_pred);
    let tau = &y1 - &y0;
    let (pi, zscore) = propensity_scores(propensity, model, sets, x.view(), x.view())?;

    let mut assign = streams.stream(Stream::Assignment);
    let treated: Vec<bool> = pi.iter().map(|&p| assign.random::<f64>() < p).collect();
    let mut noise_rng = streams.stream(Stream::Noise);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let y: Array1<f64> = (0..x.nrows())
        .map(|i| {
            let eps = sigma * noise.sample(&mut noise_rng);
            let factual = if treated[i] { y1[i] } else { y0[i] };
            factual + eps
        })
        .collect();

    Ok(SemiSyntheticDataset {
        unit_ids: (0..x.nrows()).collect(),
        names: covariates.names().to_vec(),
        observed: Observed::new(x.clone(), treated, y)?,
        truth: GroundTruth {
            y0,
            y1,
            tau,
            pi,
            sets: sets.clone(),
            model: model.clone(),
            propensity: *propensity,
            zscore,
            sigma,
        },
    })
}

/// Random disjoint train/test partition; both parts keep original row order.
pub fn train_test_split<R: Rng + ?Sized>(
    ds: &SemiSyntheticDataset,
    test_fraction: f64,
    rng: &mut R,
) -> Result<(SemiSyntheticDataset, SemiSyntheticDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("test fraction must lie in (0, 1), got {test_fraction}")));
    }
    let n = ds.n_units();
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::InvalidConfig(format!("splitting {n} units at {test_fraction} leaves an empty part")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Knobs of one data-generating configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    /// Size of each index set; `⌊0.2 · d⌋` when absent.
    pub set_size: Option<usize>,
    pub omega_pred: f64,
    pub omega_nl: f64,
    pub sigma: f64,
    pub propensity: PropensityKind,
    pub omega_pi: f64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            set_size: None,
            omega_pred: 1.0,
            omega_nl: 0.0,
            sigma: 0.1,
            propensity: PropensityKind::Uniform,
            omega_pi: 0.0,
        }
    }
}

/// Samples index sets, weights, nonlinearity and (if needed) the irrelevant
/// index from their own streams, then generates the dataset.
pub fn generate(covariates: &CovariateMatrix, cfg: &DgpConfig, streams: &Streams) -> Result<SemiSyntheticDataset> {
    let d = covariates.n_features();
    let n_i = cfg.set_size.unwrap_or_else(|| default_set_size(d));
    let sets = sample_feature_sets(d, n_i, &mut streams.stream(Stream::FeatureSets))?;
    let mut wrng = streams.stream(Stream::Weights);
    let alpha_prog = sample_weights(n_i, &mut wrng);
    let alpha0 = sample_weights(n_i, &mut wrng);
    let alpha1 = sample_weights(n_i, &mut wrng);
    let chi = Nonlinearity::sample(&mut streams.stream(Stream::Nonlinearity));
    let model = OutcomeModel::new(alpha_prog, alpha0, alpha1, chi, cfg.omega_nl, cfg.omega_pred)?;
    let irrelevant_index = if cfg.propensity == PropensityKind::Nonconfounded {
        let relevant = sets.relevant();
        let free: Vec<usize> = (0..d).filter(|i| relevant.binary_search(i).is_err()).collect();
        Some(*free.choose(&mut streams.stream(Stream::IrrelevantIndex)).expect("d > 3 n_i leaves a free index"))
    } else {
        None
    };
    let spec = PropensitySpec { kind: cfg.propensity, omega_pi: cfg.omega_pi, irrelevant_index };
    generate_dataset(covariates, &sets, &model, &spec, cfg.sigma, streams)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::covariates::synth_covariates;
    use crate::rng::seeded;

    fn data(seed: u64, cfg: DgpConfig) -> SemiSyntheticDataset {
        let cov = synth_covariates(2000, 20, 0.1, &mut seeded(seed)).unwrap();
        generate(&cov, &cfg, &Streams::new(seed)).unwrap()
    }

    #[test]
    fn noiseless_outcome_equals_selected_potential_outcome() {
        let ds = data(0, DgpConfig { sigma: 0.0, omega_nl: 0.5, ..Default::default() });
        let t = ds.ground_truth();
        let o = ds.observed();
        for i in 0..ds.n_units() {
            let want = if o.treated()[i] { t.y1[i] } else { t.y0[i] };
            assert_eq!(o.y()[i], want);
            assert_eq!(t.tau[i], t.y1[i] - t.y0[i]);
        }
    }

    #[test]
    fn treated_unit_outcome_formula() {
        let ds = data(1, DgpConfig { sigma: 0.0, omega_pred: 0.7, ..Default::default() });
        let t = ds.ground_truth();
        let i = ds.observed().treated().iter().position(|&w| w).unwrap();
        let row = ds.observed().x().row(i).to_vec();
        let c = crate::dgp::eval_components(&t.model, &t.sets, &row).unwrap();
        assert_eq!(ds.observed().y()[i], c.mu_prog + 0.7 * c.f1);
    }

    #[test]
    fn zero_predictive_scale_has_no_effect() {
        let ds = data(2, DgpConfig { omega_pred: 0.0, ..Default::default() });
        assert!(ds.ground_truth().tau.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn uniform_assignment_fraction() {
        let cov = synth_covariates(10_000, 10, 0.0, &mut seeded(3)).unwrap();
        let ds = generate(&cov, &DgpConfig::default(), &Streams::new(3)).unwrap();
        let frac = ds.observed().treated().iter().filter(|&&w| w).count() as f64 / 10_000.0;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn split_sizes_and_partition() {
        let cov = synth_covariates(100, 10, 0.0, &mut seeded(4)).unwrap();
        let ds = generate(&cov, &DgpConfig::default(), &Streams::new(4)).unwrap();
        let (tr, te) = train_test_split(&ds, 0.2, &mut seeded(5)).unwrap();
        assert_eq!((tr.n_units(), te.n_units()), (80, 20));
        let mut all: Vec<usize> = tr.unit_ids().iter().chain(te.unit_ids()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        let (tr2, te2) = train_test_split(&ds, 0.2, &mut seeded(5)).unwrap();
        assert_eq!((tr, te), (tr2, te2));
        assert!(train_test_split(&ds, 0.0, &mut seeded(5)).is_err());
        assert!(train_test_split(&ds, 0.001, &mut seeded(5)).is_err());
    }

    #[test]
    fn split_carries_ground_truth() {
        let ds = data(6, DgpConfig::default());
        let (_, te) = train_test_split(&ds, 0.2, &mut seeded(0)).unwrap();
        for (k, &id) in te.unit_ids().iter().enumerate() {
            assert_eq!(te.ground_truth().tau[k], ds.ground_truth().tau[id]);
            assert_eq!(te.observed().y()[k], ds.observed().y()[id]);
        }
    }

    #[test]
    fn deterministic_generation() {
        let cfg = DgpConfig { propensity: PropensityKind::Nonconfounded, omega_pi: 1.0, ..Default::default() };
        assert_eq!(data(7, cfg), data(7, cfg));
    }

    #[test]
    fn empty_arm_detected() {
        let o = Observed::new(Array2::zeros((3, 4)), vec![true; 3], Array1::zeros(3)).unwrap();
        assert!(matches!(o.require_both_arms(), Err(Error::EmptyGroup(_))));
    }
}
