use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;

use super::{check_cols, Differentiable, ScalarFunction};
use crate::rng::Rng;
use crate::{Error, Result};

/// Largest feature count accepted by [`shapley_exact`].
pub const MAX_EXACT_FEATURES: usize = 15;

/// Rows evaluated per call when a method expands each query point.
const CHUNK_ROWS: usize = 4096;

fn row_matrix(x: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("one row")
}

fn check_point(f: &dyn ScalarFunction, x: &[f64], baseline: &[f64]) -> Result<()> {
    let d = f.n_features();
    if x.len() != d || baseline.len() != d {
        return Err(Error::Shape(format!(
            "point has {} and baseline {} entries, function takes {d}",
            x.len(),
            baseline.len()
        )));
    }
    Ok(())
}

pub fn saliency(f: &dyn Differentiable, x: &[f64]) -> Result<Vec<f64>> {
    check_cols(&row_matrix(x).view(), f.n_features())?;
    Ok(f.gradient(row_matrix(x).view())?.row(0).to_vec())
}

pub fn saliency_batch(f: &dyn Differentiable, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    check_cols(&x, f.n_features())?;
    f.gradient(x)
}

/// Path integral of the gradient from `baseline` to `x`, midpoint rule.
pub fn integrated_gradients(f: &dyn Differentiable, x: &[f64], baseline: &[f64], steps: usize) -> Result<Vec<f64>> {
    check_point(f, x, baseline)?;
    Ok(integrated_gradients_batch(f, row_matrix(x).view(), baseline, steps)?.row(0).to_vec())
}

pub fn integrated_gradients_batch(
    f: &dyn Differentiable,
    x: ArrayView2<f64>,
    baseline: &[f64],
    steps: usize,
) -> Result<Array2<f64>> {
    let d = f.n_features();
    check_cols(&x, d)?;
    if baseline.len() != d {
        return Err(Error::Shape(format!("baseline has {} entries, expected {d}", baseline.len())));
    }
    if steps == 0 {
        return Err(Error::InvalidConfig("integrated gradients needs at least one step".into()));
    }
    let base = Array1::from(baseline.to_vec());
    let alphas: Vec<f64> = (1..=steps).map(|k| (k as f64 - 0.5) / steps as f64).collect();
    let per_chunk = (CHUNK_ROWS / steps).max(1);
    let mut out = Array2::zeros(x.dim());
    for start in (0..x.nrows()).step_by(per_chunk) {
        let end = (start + per_chunk).min(x.nrows());
        let mut path = Array2::zeros(((end - start) * steps, d));
        for (r, i) in (start..end).enumerate() {
            let delta = &x.row(i) - &base;
            for (k, &a) in alphas.iter().enumerate() {
                path.row_mut(r * steps + k).assign(&(&base + &(&delta * a)));
            }
        }
        let grads = f.gradient(path.view())?;
        for (r, i) in (start..end).enumerate() {
            let mean = grads.slice(ndarray::s![r * steps..(r + 1) * steps, ..]).sum_axis(Axis(0)) / steps as f64;
            out.row_mut(i).assign(&(&(&x.row(i) - &base) * &mean));
        }
    }
    Ok(out)
}

/// `f(x) − f(x with coordinate i at its baseline value)`.
pub fn feature_ablation(f: &dyn ScalarFunction, x: &[f64], baseline: &[f64]) -> Result<Vec<f64>> {
    check_point(f, x, baseline)?;
    Ok(feature_ablation_batch(f, row_matrix(x).view(), baseline)?.row(0).to_vec())
}

pub fn feature_ablation_batch(f: &dyn ScalarFunction, x: ArrayView2<f64>, baseline: &[f64]) -> Result<Array2<f64>> {
    let d = f.n_features();
    check_cols(&x, d)?;
    if baseline.len() != d {
        return Err(Error::Shape(format!("baseline has {} entries, expected {d}", baseline.len())));
    }
    let per_chunk = (CHUNK_ROWS / (d + 1)).max(1);
    let mut out = Array2::zeros(x.dim());
    for start in (0..x.nrows()).step_by(per_chunk) {
        let end = (start + per_chunk).min(x.nrows());
        let mut probes = Array2::zeros(((end - start) * (d + 1), d));
        for (r, i) in (start..end).enumerate() {
            for k in 0..=d {
                let mut row = probes.row_mut(r * (d + 1) + k);
                row.assign(&x.row(i));
                if k < d {
                    row[k] = baseline[k];
                }
            }
        }
        let v = f.eval(probes.view())?;
        for (r, i) in (start..end).enumerate() {
            let full = v[r * (d + 1) + d];
            for j in 0..d {
                out[[i, j]] = full - v[r * (d + 1) + j];
            }
        }
    }
    Ok(out)
}

/// Per-row `f(row) − f(row with feature i taken from a permuted row)`, one
/// shared permutation per feature.
pub fn feature_permutation(f: &dyn ScalarFunction, x: ArrayView2<f64>, rng: &mut Rng) -> Result<Array2<f64>> {
    let d = f.n_features();
    check_cols(&x, d)?;
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidConfig(format!("feature permutation needs at least 2 rows, got {n}")));
    }
    let full = f.eval(x)?;
    let mut out = Array2::zeros((n, d));
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..d {
        perm.shuffle(rng);
        let mut xp = x.to_owned();
        for (i, &p) in perm.iter().enumerate() {
            xp[[i, j]] = x[[p, j]];
        }
        let v = f.eval(xp.view())?;
        out.column_mut(j).assign(&(&full - &v));
    }
    Ok(out)
}

/// Monte-Carlo Shapley values with per-coordinate standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyEstimate {
    pub values: Vec<f64>,
    /// Standard error of each mean; infinite with a single permutation.
    pub std_errors: Vec<f64>,
    pub n_permutations: usize,
}

/// Averages marginal contributions over uniformly sampled feature orderings.
/// Features outside the coalition sit at `baseline`.
pub fn shapley_mc(
    f: &dyn ScalarFunction,
    x: &[f64],
    baseline: &[f64],
    n_permutations: usize,
    rng: &mut Rng,
) -> Result<ShapleyEstimate> {
    check_point(f, x, baseline)?;
    if n_permutations == 0 {
        return Err(Error::InvalidConfig("need at least one permutation".into()));
    }
    let d = x.len();
    let v_base = f.eval(row_matrix(baseline).view())?[0];
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    let per_chunk = (CHUNK_ROWS / d).max(1);
    let mut order: Vec<usize> = (0..d).collect();
    let mut done = 0;
    while done < n_permutations {
        let m = per_chunk.min(n_permutations - done);
        let mut orders = Vec::with_capacity(m);
        let mut probes = Array2::zeros((m * d, d));
        for p in 0..m {
            order.shuffle(rng);
            let mut z = baseline.to_vec();
            for (k, &i) in order.iter().enumerate() {
                z[i] = x[i];
                probes.row_mut(p * d + k).assign(&ndarray::ArrayView1::from(&z));
            }
            orders.push(order.clone());
        }
        let v = f.eval(probes.view())?;
        for (p, ord) in orders.iter().enumerate() {
            let mut prev = v_base;
            for (k, &i) in ord.iter().enumerate() {
                let cur = v[p * d + k];
                let c = cur - prev;
                sum[i] += c;
                sum_sq[i] += c * c;
                prev = cur;
            }
        }
        done += m;
    }
    let n = n_permutations as f64;
    let values: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_errors = (0..d)
        .map(|i| {
            if n_permutations < 2 {
                return f64::INFINITY;
            }
            let var = ((sum_sq[i] - n * values[i] * values[i]) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .collect();
    Ok(ShapleyEstimate { values, std_errors, n_permutations })
}

/// Exact Shapley values by enumerating all `2^d` coalitions.
pub fn shapley_exact(f: &dyn ScalarFunction, x: &[f64], baseline: &[f64]) -> Result<Vec<f64>> {
    check_point(f, x, baseline)?;
    let d = x.len();
    if d > MAX_EXACT_FEATURES {
        return Err(Error::Capacity(format!("exact Shapley enumerates 2^d coalitions; d = {d} exceeds {MAX_EXACT_FEATURES}")));
    }
    let n_sets = 1usize << d;
    let mut probes = Array2::zeros((n_sets, d));
    for mask in 0..n_sets {
        for i in 0..d {
            probes[[mask, i]] = if mask >> i & 1 == 1 { x[i] } else { baseline[i] };
        }
    }
    let v = f.eval(probes.view())?;
    // weight of a coalition of size s not containing i: s! (d − s − 1)! / d!
    let mut weight = vec![0.0; d];
    weight[0] = 1.0 / d as f64;
    for s in 1..d {
        weight[s] = weight[s - 1] * s as f64 / (d - s) as f64;
    }
    let mut phi = vec![0.0; d];
    for mask in 0..n_sets {
        let s = mask.count_ones() as usize;
        for (i, p) in phi.iter_mut().enumerate() {
            if mask >> i & 1 == 0 {
                *p += weight[s] * (v[mask | 1 << i] - v[mask]);
            }
        }
    }
    Ok(phi)
}
