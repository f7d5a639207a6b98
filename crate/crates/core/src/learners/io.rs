//! Estimator persistence: a JSON manifest plus a flat little-endian `f64`
//! weight file. Loading reproduces the estimator bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::estimator::{CateEstimator, Networks, Strategy};
use crate::nn::{Activation, Dense, Mlp};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkEntry {
    pub role: String,
    pub layer_sizes: Vec<usize>,
    pub output_activation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub strategy: Strategy,
    pub gamma: f64,
    pub clip: f64,
    pub seed: Option<u64>,
    pub networks: Vec<NetworkEntry>,
    /// Total number of `f64` values in the weight file.
    pub n_values: usize,
}

pub fn save_estimator(est: &CateEstimator, manifest_path: &Path, weights_path: &Path) -> Result<()> {
    let named = est.networks().named();
    let mut values = Vec::new();
    let networks = named
        .iter()
        .map(|(role, net)| {
            values.extend(net.flat_params());
            NetworkEntry {
                role: role.to_string(),
                layer_sizes: net.layer_sizes(),
                output_activation: net.output_activation().name().to_string(),
            }
        })
        .collect();
    let manifest = Manifest {
        strategy: est.strategy(),
        gamma: est.gamma(),
        clip: est.clip(),
        seed: est.seed(),
        networks,
        n_values: values.len(),
    };

    let file = File::create(weights_path).map_err(|e| Error::io(weights_path, e))?;
    let mut out = BufWriter::new(file);
    for v in &values {
        out.write_all(&v.to_le_bytes()).map_err(|e| Error::io(weights_path, e))?;
    }
    out.flush().map_err(|e| Error::io(weights_path, e))?;

    let file = File::create(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, &manifest)?;
    out.write_all(b"\n").and_then(|_| out.flush()).map_err(|e| Error::io(manifest_path, e))
}

fn build(entry: &NetworkEntry, values: &[f64]) -> Result<Mlp> {
    let act = Activation::from_name(&entry.output_activation)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown activation {:?}", entry.output_activation)))?;
    if entry.layer_sizes.len() < 2 {
        return Err(Error::InvalidConfig(format!("network {:?} has fewer than two layer sizes", entry.role)));
    }
    let mut layers = Vec::new();
    let mut pos = 0;
    for w in entry.layer_sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let nw = fan_in * fan_out;
        if pos + nw + fan_out > values.len() {
            return Err(Error::Shape("weight file is shorter than the manifest describes".into()));
        }
        let weight = Array2::from_shape_vec((fan_in, fan_out), values[pos..pos + nw].to_vec())
            .map_err(|e| Error::Shape(e.to_string()))?;
        let bias = Array1::from(values[pos + nw..pos + nw + fan_out].to_vec());
        pos += nw + fan_out;
        layers.push(Dense { weight, bias });
    }
    Mlp::from_layers(layers, act)
}

pub fn load_estimator(manifest_path: &Path, weights_path: &Path) -> Result<CateEstimator> {
    let file = File::open(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: Manifest = serde_json::from_reader(BufReader::new(file))?;
    let mut bytes = Vec::new();
    File::open(weights_path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(|e| Error::io(weights_path, e))?;
    if bytes.len() != manifest.n_values * 8 {
        return Err(Error::Shape(format!(
            "weight file holds {} bytes, manifest expects {} values",
            bytes.len(),
            manifest.n_values
        )));
    }
    let values: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();

    let mut nets = std::collections::BTreeMap::new();
    let mut pos = 0;
    for entry in &manifest.networks {
        let net = build(entry, &values[pos..])?;
        pos += net.n_params();
        nets.insert(entry.role.as_str(), net);
    }
    if pos != values.len() {
        return Err(Error::Shape("weight file is longer than the manifest describes".into()));
    }
    let mut take = |role: &str| {
        nets.remove(role).ok_or_else(|| Error::InvalidConfig(format!("manifest lacks network {role:?}")))
    };
    let networks = match manifest.strategy {
        Strategy::S => Networks::Single { net: take("mu")? },
        Strategy::T => Networks::TwoModels { mu0: take("mu0")?, mu1: take("mu1")? },
        Strategy::Tarnet | Strategy::Cfrnet => {
            Networks::Representation { trunk: take("trunk")?, head0: take("head0")?, head1: take("head1")? }
        }
        Strategy::Dr => Networks::Direct { tau: take("tau")? },
        Strategy::X => Networks::Blended { tau0: take("tau0")?, tau1: take("tau1")?, g: take("g")? },
    };
    let est = CateEstimator::new(manifest.strategy, networks, manifest.gamma, manifest.clip)?;
    Ok(match manifest.seed {
        Some(s) => est.with_seed(s),
        None => est,
    })
}
