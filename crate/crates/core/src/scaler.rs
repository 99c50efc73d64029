//! Robust feature scaling: center on the per-feature median, divide by the
//! per-feature interquartile range.
//!
//! Quantiles use linear interpolation between order statistics at rank
//! `p·(N−1)` (the "type 7" convention shared by NumPy and R defaults).
//! Features with zero interquartile range store a divisor of 1 so the
//! transform degenerates to pure centering instead of dividing by zero.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};

/// Fitted per-feature medians and interquartile ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustScalerParams {
    pub medians: Vec<f64>,
    /// Strictly positive: zero-spread features are stored as 1.
    pub iqrs: Vec<f64>,
}

impl RobustScalerParams {
    pub fn n_features(&self) -> usize {
        self.medians.len()
    }
}

/// Interpolated quantile of an already-sorted slice, rank `p·(N−1)`.
fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Fits medians and IQRs column by column.
///
/// Rejects empty input and non-finite entries. Columns whose IQR is exactly
/// zero are stored with an IQR of 1.
pub fn fit(x: &Matrix) -> Result<RobustScalerParams> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::invalid("cannot fit scaler on an empty matrix"));
    }
    if !x.all_finite() {
        return Err(Error::invalid("cannot fit scaler: non-finite entry"));
    }
    let mut medians = Vec::with_capacity(x.cols());
    let mut iqrs = Vec::with_capacity(x.cols());
    let mut col = vec![0.0; x.rows()];
    for j in 0..x.cols() {
        for (i, slot) in col.iter_mut().enumerate() {
            *slot = x.get(i, j);
        }
        col.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite values"));
        medians.push(sorted_quantile(&col, 0.5));
        let iqr = sorted_quantile(&col, 0.75) - sorted_quantile(&col, 0.25);
        iqrs.push(if iqr == 0.0 { 1.0 } else { iqr });
    }
    Ok(RobustScalerParams { medians, iqrs })
}

/// Applies `(x_j − median_j) / iqr_j` componentwise.
pub fn transform(params: &RobustScalerParams, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != params.medians.len() {
        return Err(Error::invalid(format!(
            "transform expects {} features, got {}",
            params.medians.len(),
            x.len()
        )));
    }
    Ok(x.iter()
        .zip(params.medians.iter().zip(&params.iqrs))
        .map(|(&v, (&m, &iqr))| (v - m) / iqr)
        .collect())
}

/// Transforms every row of a matrix.
pub fn transform_matrix(params: &RobustScalerParams, x: &Matrix) -> Result<Matrix> {
    if x.cols() != params.medians.len() {
        return Err(Error::invalid(format!(
            "transform expects {} features, got {}",
            params.medians.len(),
            x.cols()
        )));
    }
    Ok(Matrix::from_fn(x.rows(), x.cols(), |i, j| {
        (x.get(i, j) - params.medians[j]) / params.iqrs[j]
    }))
}
