use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::{Error, Result};

fn check(rep0: &ArrayView2<f64>, rep1: &ArrayView2<f64>) -> Result<(Array1<f64>, Array1<f64>)> {
    if rep0.ncols() != rep1.ncols() {
        return Err(Error::Shape(format!(
            "representations have {} and {} columns",
            rep0.ncols(),
            rep1.ncols()
        )));
    }
    let m0 = rep0
        .mean_axis(Axis(0))
        .ok_or_else(|| Error::EmptyGroup("first representation group is empty".into()))?;
    let m1 = rep1
        .mean_axis(Axis(0))
        .ok_or_else(|| Error::EmptyGroup("second representation group is empty".into()))?;
    Ok((m0, m1))
}

/// Linear-kernel MMD²: the squared distance between group means.
pub fn mmd2_linear(rep0: ArrayView2<f64>, rep1: ArrayView2<f64>) -> Result<f64> {
    let (m0, m1) = check(&rep0, &rep1)?;
    Ok((&m0 - &m1).mapv(|v| v * v).sum())
}

/// MMD² together with its gradient w.r.t. every row of each group.
pub fn mmd2_linear_with_grad(
    rep0: ArrayView2<f64>,
    rep1: ArrayView2<f64>,
) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    let (m0, m1) = check(&rep0, &rep1)?;
    let diff = &m0 - &m1;
    let value = diff.mapv(|v| v * v).sum();
    let g0_row = &diff * (2.0 / rep0.nrows() as f64);
    let g1_row = &diff * (-2.0 / rep1.nrows() as f64);
    let g0 = g0_row.broadcast((rep0.nrows(), rep0.ncols())).unwrap().to_owned();
    let g1 = g1_row.broadcast((rep1.nrows(), rep1.ncols())).unwrap().to_owned();
    Ok((value, g0, g1))
}
