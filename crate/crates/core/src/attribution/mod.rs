//! Feature attribution applied to the CATE function.
//!
//! Scores are computed on `τ̂` directly. Perturbation methods replace
//! coordinates by a baseline, which defaults to the zero vector.

mod methods;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dgp::TrueCate;
use crate::learners::CateEstimator;
use crate::nn::Mlp;
use crate::rng::Rng;
use crate::{Error, Result};

pub use methods::{
    feature_ablation, feature_ablation_batch, feature_permutation, integrated_gradients, integrated_gradients_batch,
    saliency, saliency_batch, shapley_exact, shapley_mc, ShapleyEstimate, MAX_EXACT_FEATURES,
};

/// A real-valued function of `d` covariates, evaluated row-wise.
pub trait ScalarFunction {
    fn n_features(&self) -> usize;
    fn eval(&self, x: ArrayView2<f64>) -> Result<Array1<f64>>;
}

/// A [`ScalarFunction`] with an exact row-wise gradient.
pub trait Differentiable: ScalarFunction {
    fn gradient(&self, x: ArrayView2<f64>) -> Result<Array2<f64>>;
}

impl ScalarFunction for CateEstimator {
    fn n_features(&self) -> usize {
        CateEstimator::n_features(self)
    }

    fn eval(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.predict_cate(x)
    }
}

impl Differentiable for CateEstimator {
    fn gradient(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.cate_input_gradients(x)
    }
}

impl ScalarFunction for TrueCate {
    fn n_features(&self) -> usize {
        TrueCate::n_features(self)
    }

    fn eval(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.predict(x)
    }
}

impl Differentiable for TrueCate {
    fn gradient(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        TrueCate::gradient(self, x)
    }
}

impl ScalarFunction for Mlp {
    fn n_features(&self) -> usize {
        self.input_dim()
    }

    fn eval(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.predict(x)
    }
}

impl Differentiable for Mlp {
    fn gradient(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.input_gradient(x)
    }
}

/// Wraps row closures `f(x)` and `∇f(x)`.
pub struct FnScalar<F, G = fn(&[f64]) -> Vec<f64>> {
    d: usize,
    f: F,
    grad: Option<G>,
}

impl<F: Fn(&[f64]) -> f64> FnScalar<F> {
    pub fn new(d: usize, f: F) -> Self {
        Self { d, f, grad: None }
    }
}

impl<F: Fn(&[f64]) -> f64, G: Fn(&[f64]) -> Vec<f64>> FnScalar<F, G> {
    pub fn with_gradient(d: usize, f: F, grad: G) -> Self {
        Self { d, f, grad: Some(grad) }
    }
}

fn check_cols(x: &ArrayView2<f64>, d: usize) -> Result<()> {
    if x.ncols() != d {
        return Err(Error::Shape(format!("input has {} columns, function takes {d}", x.ncols())));
    }
    Ok(())
}

impl<F: Fn(&[f64]) -> f64, G> ScalarFunction for FnScalar<F, G> {
    fn n_features(&self) -> usize {
        self.d
    }

    fn eval(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        check_cols(&x, self.d)?;
        Ok(x.rows().into_iter().map(|r| (self.f)(&r.to_vec())).collect())
    }
}

impl<F: Fn(&[f64]) -> f64, G: Fn(&[f64]) -> Vec<f64>> Differentiable for FnScalar<F, G> {
    fn gradient(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_cols(&x, self.d)?;
        let grad = self.grad.as_ref().ok_or_else(|| Error::InvalidConfig("function has no gradient".into()))?;
        let mut out = Array2::zeros(x.dim());
        for (i, r) in x.rows().into_iter().enumerate() {
            let g = grad(&r.to_vec());
            if g.len() != self.d {
                return Err(Error::Shape(format!("gradient has {} entries, expected {}", g.len(), self.d)));
            }
            out.row_mut(i).assign(&Array1::from(g));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionMethod {
    Saliency,
    IntegratedGradients,
    FeatureAblation,
    FeaturePermutation,
    ShapleyMc,
    ShapleyExact,
}

impl AttributionMethod {
    pub const ALL: [AttributionMethod; 6] = [
        Self::Saliency,
        Self::IntegratedGradients,
        Self::FeatureAblation,
        Self::FeaturePermutation,
        Self::ShapleyMc,
        Self::ShapleyExact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Saliency => "saliency",
            Self::IntegratedGradients => "integrated_gradients",
            Self::FeatureAblation => "feature_ablation",
            Self::FeaturePermutation => "feature_permutation",
            Self::ShapleyMc => "shapley_mc",
            Self::ShapleyExact => "shapley_exact",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == name)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown attribution method {name:?}")))
    }
}

impl std::fmt::Display for AttributionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttributionSettings {
    /// Reference point for perturbations and path integrals; zeros if absent.
    pub baseline: Option<Vec<f64>>,
    pub ig_steps: usize,
    /// Sampled orderings per unit for Monte-Carlo Shapley; `100 · d` if absent.
    pub shapley_permutations: Option<usize>,
    /// Maximum number of query rows attributed.
    pub cap: usize,
}

impl Default for AttributionSettings {
    fn default() -> Self {
        Self { baseline: None, ig_steps: 50, shapley_permutations: None, cap: 1000 }
    }
}

impl AttributionSettings {
    pub fn baseline_for(&self, d: usize) -> Result<Vec<f64>> {
        match &self.baseline {
            None => Ok(vec![0.0; d]),
            Some(b) if b.len() == d => Ok(b.clone()),
            Some(b) => Err(Error::Shape(format!("baseline has {} entries, expected {d}", b.len()))),
        }
    }
}

/// Scores for a batch of query rows.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionMatrix {
    /// One row per attributed unit, one column per feature.
    pub scores: Array2<f64>,
    pub method: AttributionMethod,
    pub baseline: Vec<f64>,
    /// Index into the query matrix of every score row.
    pub rows: Vec<usize>,
}

impl AttributionMatrix {
    /// Writes `unit_id,method,a_0..`, mapping rows through `unit_ids`.
    pub fn write_csv(&self, unit_ids: &[usize], path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        let mut header = vec!["unit_id".to_string(), "method".into()];
        header.extend((0..self.scores.ncols()).map(|j| format!("a_{j}")));
        w.write_record(&header)?;
        for (k, &r) in self.rows.iter().enumerate() {
            let id = unit_ids.get(r).ok_or_else(|| Error::Shape(format!("no unit id for query row {r}")))?;
            let mut rec = vec![id.to_string(), self.method.name().to_string()];
            rec.extend(self.scores.row(k).iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Attribution scores read back from [`AttributionMatrix::write_csv`] output.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedAttributions {
    pub unit_ids: Vec<usize>,
    pub method: AttributionMethod,
    pub scores: Array2<f64>,
}

pub fn read_attribution_csv(path: &Path) -> Result<LoadedAttributions> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(std::io::BufReader::new(file));
    let header = rdr.headers()?.clone();
    if header.len() < 3 || &header[0] != "unit_id" || &header[1] != "method" {
        return Err(Error::Parse { row: 1, column: 1, message: "expected header unit_id,method,a_0,...".into() });
    }
    let d = header.len() - 2;
    let (mut ids, mut values, mut method) = (Vec::new(), Vec::new(), None);
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = k + 2;
        let parse_err = |column: usize| Error::Parse { row, column, message: format!("cannot parse {:?}", &rec[column - 1]) };
        ids.push(rec[0].parse::<usize>().map_err(|_| parse_err(1))?);
        let m = AttributionMethod::from_name(&rec[1])?;
        if *method.get_or_insert(m) != m {
            return Err(Error::Parse { row, column: 2, message: "mixed attribution methods".into() });
        }
        for j in 0..d {
            values.push(rec[2 + j].parse::<f64>().map_err(|_| parse_err(3 + j))?);
        }
    }
    let method = method.ok_or_else(|| Error::Parse { row: 2, column: 1, message: "no attribution rows".into() })?;
    let scores = Array2::from_shape_vec((ids.len(), d), values).map_err(|e| Error::Shape(e.to_string()))?;
    Ok(LoadedAttributions { unit_ids: ids, method, scores })
}

/// Query rows kept under `cap`: all rows when within the cap, otherwise the
/// first `cap` of a seeded shuffle, returned in ascending order.
pub fn capped_rows(n: usize, cap: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if cap == 0 {
        return Err(Error::InvalidConfig("attribution cap must be at least 1".into()));
    }
    let mut rows: Vec<usize> = (0..n).collect();
    if n > cap {
        rows.shuffle(rng);
        rows.truncate(cap);
        rows.sort_unstable();
    }
    Ok(rows)
}

/// Applies `method` to `f` on (at most `settings.cap`) rows of `x`.
pub fn attribute_batch(
    method: AttributionMethod,
    f: &dyn Differentiable,
    x: ArrayView2<f64>,
    settings: &AttributionSettings,
    rng: &mut Rng,
) -> Result<AttributionMatrix> {
    let d = f.n_features();
    check_cols(&x, d)?;
    let baseline = settings.baseline_for(d)?;
    let rows = capped_rows(x.nrows(), settings.cap, rng)?;
    let q = x.select(Axis(0), &rows);
    let scores = match method {
        AttributionMethod::Saliency => saliency_batch(f, q.view())?,
        AttributionMethod::IntegratedGradients => integrated_gradients_batch(f, q.view(), &baseline, settings.ig_steps)?,
        AttributionMethod::FeatureAblation => feature_ablation_batch(f, q.view(), &baseline)?,
        AttributionMethod::FeaturePermutation => feature_permutation(f, q.view(), rng)?,
        AttributionMethod::ShapleyMc => {
            let n_perm = settings.shapley_permutations.unwrap_or(100 * d);
            let mut out = Array2::zeros(q.dim());
            for (k, row) in q.rows().into_iter().enumerate() {
                let est = shapley_mc(f, &row.to_vec(), &baseline, n_perm, rng)?;
                out.row_mut(k).assign(&Array1::from(est.values));
            }
            out
        }
        AttributionMethod::ShapleyExact => {
            let mut out = Array2::zeros(q.dim());
            for (k, row) in q.rows().into_iter().enumerate() {
                out.row_mut(k).assign(&Array1::from(shapley_exact(f, &row.to_vec(), &baseline)?));
            }
            out
        }
    };
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("{method} produced non-finite scores")));
    }
    Ok(AttributionMatrix { scores, method, baseline, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{Networks, Strategy};
    use crate::nn::{Activation, Dense};
    use crate::rng::seeded;
    use ndarray::array;

    fn linear_estimator() -> CateEstimator {
        let tau = Mlp::from_layers(
            vec![Dense { weight: array![[1.5], [-2.0], [0.0], [0.25]], bias: array![0.5] }],
            Activation::Identity,
        )
        .unwrap();
        CateEstimator::new(Strategy::Dr, Networks::Direct { tau }, 0.0, 0.01).unwrap()
    }

    #[test]
    fn saliency_on_linear_estimator_is_weight_vector() {
        let est = linear_estimator();
        let x = Array2::from_shape_fn((7, 4), |(i, j)| (i * j) as f64 - 3.0);
        let m = attribute_batch(AttributionMethod::Saliency, &est, x.view(), &Default::default(), &mut seeded(0)).unwrap();
        for row in m.scores.rows() {
            assert_eq!(row.to_vec(), vec![1.5, -2.0, 0.0, 0.25]);
        }
        assert_eq!(m.rows, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn cap_draws_deterministic_subset() {
        let est = linear_estimator();
        let x = Array2::from_shape_fn((5000, 4), |(i, j)| (i + j) as f64 * 1e-3);
        let s = AttributionSettings::default();
        let a = attribute_batch(AttributionMethod::Saliency, &est, x.view(), &s, &mut seeded(1)).unwrap();
        let b = attribute_batch(AttributionMethod::Saliency, &est, x.view(), &s, &mut seeded(1)).unwrap();
        assert_eq!(a.scores.nrows(), 1000);
        assert_eq!(a.rows, b.rows);
        let mut shuffled: Vec<usize> = (0..5000).collect();
        shuffled.shuffle(&mut seeded(1));
        let mut expected = shuffled[..1000].to_vec();
        expected.sort_unstable();
        assert_eq!(a.rows, expected);
    }

    #[test]
    fn batch_ig_matches_single_rows() {
        let mut rng = seeded(2);
        let net = Mlp::new(&[4, 6, 6, 1], Activation::Identity, &mut rng).unwrap();
        let x = Array2::from_shape_fn((9, 4), |(i, j)| ((i * 4 + j) as f64 * 0.7).sin());
        let m = attribute_batch(AttributionMethod::IntegratedGradients, &net, x.view(), &Default::default(), &mut rng).unwrap();
        for (k, row) in x.rows().into_iter().enumerate() {
            let single = integrated_gradients(&net, &row.to_vec(), &[0.0; 4], 50).unwrap();
            for j in 0..4 {
                assert!((m.scores[[k, j]] - single[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn method_names_roundtrip() {
        for m in AttributionMethod::ALL {
            assert_eq!(AttributionMethod::from_name(m.name()).unwrap(), m);
        }
        assert!(matches!(AttributionMethod::from_name("lime"), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn csv_export() {
        let est = linear_estimator();
        let x = Array2::ones((2, 4));
        let m = attribute_batch(AttributionMethod::FeatureAblation, &est, x.view(), &Default::default(), &mut seeded(0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        m.write_csv(&[10, 11], &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, "unit_id,method,a_0,a_1,a_2,a_3\n10,feature_ablation,1.5,-2,0,0.25\n11,feature_ablation,1.5,-2,0,0.25\n");
        let back = read_attribution_csv(&p).unwrap();
        assert_eq!(back.unit_ids, vec![10, 11]);
        assert_eq!(back.method, AttributionMethod::FeatureAblation);
        assert_eq!(back.scores, m.scores);
    }
}
