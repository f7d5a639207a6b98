//! CSV and JSON export of generated datasets.
//!
//! The observed file (`unit_id,w,y,x_0..`) is what an estimator may read.
//! Ground truth lives in a separate file (`unit_id,y0,y1,tau,pi`) plus a JSON
//! sidecar describing the generating model. Floats are written in Rust's
//! shortest round-trip form, so reading a file back is lossless.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::dataset::{Observed, SemiSyntheticDataset};
use super::model::{FeatureIndexSets, OutcomeModel};
use super::propensity::{PropensitySpec, ZScoreStats};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub feature_names: Vec<String>,
    pub sets: FeatureIndexSets,
    pub model: OutcomeModel,
    pub chi: String,
    pub sigma: f64,
    pub propensity: PropensitySpec,
    pub zscore: Option<ZScoreStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub unit_id: usize,
    pub y0: f64,
    pub y1: f64,
    pub tau: f64,
    pub pi: f64,
}

/// Observed data read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedObserved {
    pub unit_ids: Vec<usize>,
    pub observed: Observed,
}

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

pub fn write_dataset_csv(ds: &SemiSyntheticDataset, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let d = ds.observed().n_features();
    let mut header = vec!["unit_id".to_string(), "w".into(), "y".into()];
    header.extend((0..d).map(|j| format!("x_{j}")));
    w.write_record(&header)?;
    let o = ds.observed();
    for (i, &id) in ds.unit_ids().iter().enumerate() {
        let mut rec = vec![id.to_string(), u8::from(o.treated()[i]).to_string(), o.y()[i].to_string()];
        rec.extend(o.x().row(i).iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_truth_csv(ds: &SemiSyntheticDataset, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let t = ds.ground_truth();
    for (i, &unit_id) in ds.unit_ids().iter().enumerate() {
        w.serialize(TruthRow { unit_id, y0: t.y0[i], y1: t.y1[i], tau: t.tau[i], pi: t.pi[i] })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_sidecar(ds: &SemiSyntheticDataset, path: &Path) -> Result<()> {
    let t = ds.ground_truth();
    let sidecar = Sidecar {
        feature_names: ds.feature_names().to_vec(),
        sets: t.sets.clone(),
        model: t.model.clone(),
        chi: t.model.chi.name().to_string(),
        sigma: t.sigma,
        propensity: t.propensity,
        zscore: t.zscore,
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, &sidecar)?;
    out.write_all(b"\n").and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

fn parse_cell<T: std::str::FromStr>(cell: &str, row: usize, column: usize) -> Result<T> {
    cell.trim().parse().map_err(|_| Error::Parse { row, column, message: format!("cannot parse {cell:?}") })
}

pub fn read_observed_csv(path: &Path) -> Result<LoadedObserved> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(BufReader::new(file));
    let header = rdr.headers()?.clone();
    if header.len() < 4 || &header[0] != "unit_id" || &header[1] != "w" || &header[2] != "y" {
        return Err(Error::Parse { row: 1, column: 1, message: "expected header unit_id,w,y,x_0,...".into() });
    }
    let d = header.len() - 3;
    let (mut ids, mut treated, mut y, mut x) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = k + 2;
        if rec.len() != header.len() {
            return Err(Error::Parse { row, column: rec.len() + 1, message: "wrong number of fields".into() });
        }
        ids.push(parse_cell::<usize>(&rec[0], row, 1)?);
        treated.push(match rec[1].trim() {
            "0" => false,
            "1" => true,
            other => return Err(Error::Parse { row, column: 2, message: format!("assignment must be 0 or 1, got {other:?}") }),
        });
        y.push(parse_cell::<f64>(&rec[2], row, 3)?);
        for j in 0..d {
            x.push(parse_cell::<f64>(&rec[3 + j], row, 4 + j)?);
        }
    }
    let n = ids.len();
    let x = Array2::from_shape_vec((n, d), x).map_err(|e| Error::Shape(e.to_string()))?;
    Ok(LoadedObserved { unit_ids: ids, observed: Observed::new(x, treated, Array1::from(y))? })
}

pub fn read_truth_csv(path: &Path) -> Result<Vec<TruthRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(BufReader::new(file));
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{generate, synth_covariates, DgpConfig};
    use crate::rng::{seeded, Streams};

    #[test]
    fn roundtrip_is_lossless() {
        let cov = synth_covariates(50, 10, 0.2, &mut seeded(0)).unwrap();
        let ds = generate(&cov, &DgpConfig { omega_nl: 0.3, ..Default::default() }, &Streams::new(0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (p_obs, p_truth, p_meta) =
            (dir.path().join("d.csv"), dir.path().join("t.csv"), dir.path().join("m.json"));
        write_dataset_csv(&ds, &p_obs).unwrap();
        write_truth_csv(&ds, &p_truth).unwrap();
        write_sidecar(&ds, &p_meta).unwrap();

        let back = read_observed_csv(&p_obs).unwrap();
        assert_eq!(back.unit_ids, ds.unit_ids());
        assert_eq!(&back.observed, ds.observed());

        let truth = read_truth_csv(&p_truth).unwrap();
        assert_eq!(truth.len(), 50);
        for (i, r) in truth.iter().enumerate() {
            assert_eq!(r.tau, ds.ground_truth().tau[i]);
            assert_eq!(r.pi, ds.ground_truth().pi[i]);
        }
        let meta = read_sidecar(&p_meta).unwrap();
        assert_eq!(meta.model, ds.ground_truth().model);
        assert_eq!(meta.sets, ds.ground_truth().sets);

        let head = std::fs::read_to_string(&p_obs).unwrap();
        assert!(head.starts_with("unit_id,w,y,x_0,x_1,"));
        assert!(std::fs::read_to_string(&p_truth).unwrap().starts_with("unit_id,y0,y1,tau,pi\n"));
    }

    #[test]
    fn bad_assignment_reports_location() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "unit_id,w,y,x_0\n0,1,0.5,1\n1,2,0.5,1\n").unwrap();
        match read_observed_csv(&p) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (3, 2)),
            other => panic!("{other:?}"),
        }
    }
}
