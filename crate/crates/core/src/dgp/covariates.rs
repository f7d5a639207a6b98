use std::path::Path;

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Covariates of the units, `N × d`, with feature names.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateMatrix {
    x: Array2<f64>,
    names: Vec<String>,
}

impl CovariateMatrix {
    pub fn new(x: Array2<f64>, names: Vec<String>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::InvalidConfig("covariate matrix has no units".into()));
        }
        if x.ncols() < 4 {
            return Err(Error::InvalidConfig(format!(
                "need at least 4 features, got {}",
                x.ncols()
            )));
        }
        if names.len() != x.ncols() {
            return Err(Error::Shape(format!(
                "{} feature names for {} columns",
                names.len(),
                x.ncols()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("covariates contain non-finite values".into()));
        }
        Ok(Self { x, names })
    }

    /// Names `x_0 .. x_{d-1}`.
    pub fn unnamed(x: Array2<f64>) -> Result<Self> {
        let names = default_names(x.ncols());
        Self::new(x, names)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_units(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.x
    }
}

pub fn default_names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("x_{i}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    None,
    /// Each column mapped onto [0, 1]; constant columns become 0.
    Minmax,
    /// Each column centred and divided by its population standard deviation.
    Zscore,
}

/// Reads a numeric CSV with a header row of feature names.
pub fn load_covariates_csv(path: &Path, normalize: Normalization) -> Result<CovariateMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::Parse { row: 1, column: 1, message: "empty header".into() });
    }
    if headers.iter().all(|h| h.parse::<f64>().is_ok()) {
        return Err(Error::Parse {
            row: 1,
            column: 1,
            message: "header row missing: first row is numeric".into(),
        });
    }
    let names: Vec<String> = headers.iter().map(str::to_owned).collect();
    let d = names.len();
    let mut data = Vec::new();
    let mut n = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 2;
        if record.len() != d {
            return Err(Error::Parse {
                row,
                column: record.len().min(d) + 1,
                message: format!("expected {d} cells, found {}", record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: j + 1,
                message: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { row, column: j + 1, message: "non-finite value".into() });
            }
            data.push(v);
        }
        n += 1;
    }
    let mut x = Array2::from_shape_vec((n, d), data).expect("row lengths checked");
    normalize_columns(&mut x, normalize, &names)?;
    CovariateMatrix::new(x, names)
}

pub fn normalize_columns(x: &mut Array2<f64>, how: Normalization, names: &[String]) -> Result<()> {
    match how {
        Normalization::None => {}
        Normalization::Minmax => {
            for mut col in x.axis_iter_mut(Axis(1)) {
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let span = hi - lo;
                col.mapv_inplace(|v| if span > 0.0 { (v - lo) / span } else { 0.0 });
            }
        }
        Normalization::Zscore => {
            for (j, mut col) in x.axis_iter_mut(Axis(1)).enumerate() {
                let mean = col.mean().unwrap_or(0.0);
                let std = col.mapv(|v| (v - mean).powi(2)).mean().unwrap_or(0.0).sqrt();
                if std <= 0.0 {
                    return Err(Error::Normalization(format!(
                        "column {:?} is constant",
                        names.get(j).map(String::as_str).unwrap_or("?")
                    )));
                }
                col.mapv_inplace(|v| (v - mean) / std);
            }
        }
    }
    Ok(())
}

/// Gaussian covariates with unit variances and constant pairwise correlation
/// `rho`, drawn as `sqrt(rho) z_0 + sqrt(1 - rho) z_j`.
pub fn synth_covariates<R: Rng + ?Sized>(n: usize, d: usize, rho: f64, rng: &mut R) -> Result<CovariateMatrix> {
    if d < 4 {
        return Err(Error::InvalidConfig(format!("need at least 4 features, got {d}")));
    }
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one unit".into()));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidConfig(format!("correlation must lie in [0, 1), got {rho}")));
    }
    let shared = rho.sqrt();
    let own = (1.0 - rho).sqrt();
    let mut x = Array2::zeros((n, d));
    for mut row in x.rows_mut() {
        let common: f64 = rng.sample(StandardNormal);
        for v in row.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = shared * common + own * z;
        }
    }
    CovariateMatrix::unnamed(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn minmax_maps_to_unit_interval() {
        let f = write("a,b,c,d\n0,10,0,1\n5,5,2,1\n10,0,4,1\n");
        let m = load_covariates_csv(f.path(), Normalization::Minmax).unwrap();
        assert_eq!(m.values().column(0).to_vec(), vec![0.0, 0.5, 1.0]);
        assert_eq!(m.values().column(1).to_vec(), vec![1.0, 0.5, 0.0]);
        assert_eq!(m.values().column(3).to_vec(), vec![0.0, 0.0, 0.0]);
        assert_eq!(m.names(), &["a", "b", "c", "d"]);
    }

    #[test]
    fn zscore_uses_population_std() {
        let f = write("a,b,c,d\n1,0,5,2\n2,1,6,3\n3,5,7,9\n");
        let m = load_covariates_csv(f.path(), Normalization::Zscore).unwrap();
        let col = m.values().column(0);
        let s = (1.5f64).sqrt(); // 1 / sqrt(2/3)
        for (got, want) in col.iter().zip([-s, 0.0, s]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((col[0] + 1.2247).abs() < 1e-4);
    }

    #[test]
    fn zscore_rejects_constant_column() {
        let f = write("a,b,c,d\n1,0,5,2\n2,0,6,3\n");
        assert!(matches!(
            load_covariates_csv(f.path(), Normalization::Zscore),
            Err(Error::Normalization(_))
        ));
    }

    #[test]
    fn missing_header_is_a_parse_error() {
        let f = write("1,2,3,4\n5,6,7,8\n");
        assert!(matches!(load_covariates_csv(f.path(), Normalization::None), Err(Error::Parse { row: 1, .. })));
    }

    #[test]
    fn non_numeric_cell_reports_position() {
        let f = write("a,b,c,d\n1,2,3,4\n5,oops,7,8\n");
        match load_covariates_csv(f.path(), Normalization::None) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (3, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn offdiag_correlations(m: &CovariateMatrix) -> Vec<f64> {
        let x = m.values();
        let n = x.nrows() as f64;
        let means = x.mean_axis(Axis(0)).unwrap();
        let c = x - &means;
        let cov = c.t().dot(&c) / n;
        let mut out = Vec::new();
        for i in 0..x.ncols() {
            for j in 0..i {
                out.push(cov[[i, j]] / (cov[[i, i]] * cov[[j, j]]).sqrt());
            }
        }
        out
    }

    #[test]
    fn synthetic_correlations() {
        for rho in [0.0, 0.5] {
            let m = synth_covariates(10_000, 6, rho, &mut seeded(3)).unwrap();
            for c in offdiag_correlations(&m) {
                assert!((c - rho).abs() < 0.05, "rho {rho}: {c}");
            }
        }
    }

    #[test]
    fn synthetic_is_deterministic_and_validated() {
        let a = synth_covariates(50, 5, 0.2, &mut seeded(1)).unwrap();
        let b = synth_covariates(50, 5, 0.2, &mut seeded(1)).unwrap();
        assert_eq!(a, b);
        assert!(synth_covariates(50, 3, 0.0, &mut seeded(1)).is_err());
        assert!(synth_covariates(50, 5, 1.0, &mut seeded(1)).is_err());
    }
}
