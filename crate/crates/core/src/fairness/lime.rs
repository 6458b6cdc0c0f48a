use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::numcore::{rng, svd, Matrix};

use super::{ExplanationMethod, ExplanationReport, FairnessError, Model, Result};

pub const MIN_SAMPLES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeParams {
    pub n_samples: usize,
    /// `None` means 0.75·√d.
    pub kernel_width: Option<f64>,
}

impl Default for LimeParams {
    fn default() -> Self {
        LimeParams {
            n_samples: 1000,
            kernel_width: None,
        }
    }
}

/// Perturbation set around `row`: sample 0 is the row itself, every other
/// sample flips each feature (`v → 1 − v`) with probability 1/2.
pub fn perturbations(row: &[f64], n_samples: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let d = row.len();
    let mut r = rng::seeded(seed);
    let mut m = Matrix::zeros(n_samples, d);
    let mut flips = vec![0usize; n_samples];
    for s in 0..n_samples {
        for (j, &v) in row.iter().enumerate() {
            let flip = s > 0 && r.random_bool(0.5);
            m[(s, j)] = if flip { 1.0 - v } else { v };
            flips[s] += usize::from(flip);
        }
    }
    (m, flips)
}

pub fn kernel_weights(flips: &[usize], width: f64) -> Vec<f64> {
    flips.iter().map(|&h| (-(h as f64) / (width * width)).exp()).collect()
}

/// Weighted least squares with an intercept, solved through the SVD
/// pseudo-inverse of the √w-scaled design. Returns `(intercept, coefficients)`.
pub fn weighted_least_squares(x: &Matrix, y: &[f64], w: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (n, d) = (x.rows(), x.cols());
    if y.len() != n || w.len() != n {
        return Err(FairnessError::InvalidArgument("design, targets and weights differ in length".into()));
    }
    let mut a = Matrix::zeros(n, d + 1);
    let mut b = vec![0.0; n];
    for i in 0..n {
        let sw = w[i].sqrt();
        a[(i, 0)] = sw;
        for j in 0..d {
            a[(i, j + 1)] = sw * x[(i, j)];
        }
        b[i] = sw * y[i];
    }
    let s = svd(&a)?;
    let smax = s.singular_values.first().copied().unwrap_or(0.0);
    let cutoff = smax * 1e-10 * (n.max(d + 1) as f64);
    let mut beta = vec![0.0; d + 1];
    for (k, &sk) in s.singular_values.iter().enumerate() {
        if sk <= cutoff {
            continue;
        }
        let ub: f64 = (0..n).map(|i| s.u[(i, k)] * b[i]).sum::<f64>() / sk;
        for (j, bj) in beta.iter_mut().enumerate() {
            *bj += s.v[(j, k)] * ub;
        }
    }
    let intercept = beta.remove(0);
    Ok((intercept, beta))
}

/// Weighted R² of the surrogate on its own sample; 1 when the target is constant.
pub fn weighted_r2(x: &Matrix, y: &[f64], w: &[f64], intercept: f64, coef: &[f64]) -> f64 {
    let wsum: f64 = w.iter().sum();
    let ybar = w.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / wsum;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (i, row) in x.row_iter().enumerate() {
        let pred = intercept + row.iter().zip(coef).map(|(a, b)| a * b).sum::<f64>();
        ss_res += w[i] * (y[i] - pred).powi(2);
        ss_tot += w[i] * (y[i] - ybar).powi(2);
    }
    if ss_tot <= 1e-15 {
        return if ss_res <= 1e-15 { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}

/// Local linear surrogate of `model` around `row`.
pub fn lime_explain(model: &dyn Model, row: &[f64], params: &LimeParams, seed: u64) -> Result<ExplanationReport> {
    if params.n_samples < MIN_SAMPLES {
        return Err(FairnessError::InvalidArgument(format!(
            "lime needs at least {MIN_SAMPLES} samples, got {}",
            params.n_samples
        )));
    }
    let d = row.len();
    if d == 0 {
        return Err(FairnessError::InvalidArgument("cannot explain an empty row".into()));
    }
    let width = params.kernel_width.unwrap_or(0.75 * (d as f64).sqrt());
    if !(width > 0.0 && width.is_finite()) {
        return Err(FairnessError::InvalidArgument(format!("kernel width must be positive, got {width}")));
    }
    let (x, flips) = perturbations(row, params.n_samples, seed);
    let first = x.row(0);
    if x.row_iter().all(|r| r == first) {
        return Err(FairnessError::Explanation("all perturbations are identical to the row".into()));
    }
    let y: Vec<f64> = x.row_iter().map(|r| model.output(r)).collect();
    let w = kernel_weights(&flips, width);
    let (intercept, weights) = weighted_least_squares(&x, &y, &w)?;
    let fidelity = weighted_r2(&x, &y, &w, intercept, &weights);
    Ok(ExplanationReport {
        method: ExplanationMethod::Lime,
        row: 0,
        weights,
        intercept,
        model_output: y[0],
        fidelity: Some(fidelity),
        efficiency_residual: None,
    })
}
