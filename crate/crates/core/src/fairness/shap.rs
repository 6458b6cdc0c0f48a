use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::numcore::{rng, Matrix};

use super::{ExplanationMethod, ExplanationReport, FairnessError, Model, Result};

/// Exact enumeration visits 2^d subsets; beyond this use Monte Carlo.
pub const EXACT_FEATURE_LIMIT: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapMode {
    Exact,
    MonteCarlo { permutations: usize },
}

/// Mean model output with the features in `mask` taken from `row` and the
/// rest from each background row.
fn coalition_value(model: &dyn Model, row: &[f64], background: &Matrix, mask: u32, z: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for b in background.row_iter() {
        for (j, zj) in z.iter_mut().enumerate() {
            *zj = if mask >> j & 1 == 1 { row[j] } else { b[j] };
        }
        total += model.output(z);
    }
    total / background.rows() as f64
}

fn exact(model: &dyn Model, row: &[f64], background: &Matrix) -> (f64, Vec<f64>) {
    let d = row.len();
    let mut z = vec![0.0; d];
    let values: Vec<f64> = (0..1u32 << d)
        .map(|mask| coalition_value(model, row, background, mask, &mut z))
        .collect();
    // weight(s) = s!(d-s-1)!/d!
    let mut weight = vec![0.0; d];
    for (s, w) in weight.iter_mut().enumerate() {
        let mut v = 1.0 / d as f64;
        // 1/(d · C(d-1, s))
        for k in 0..s {
            v *= (k + 1) as f64 / (d - 1 - k) as f64;
        }
        *w = v;
    }
    let mut phi = vec![0.0; d];
    for mask in 0..1u32 << d {
        let s = mask.count_ones() as usize;
        for (i, p) in phi.iter_mut().enumerate() {
            if mask >> i & 1 == 0 {
                *p += weight[s] * (values[(mask | 1 << i) as usize] - values[mask as usize]);
            }
        }
    }
    (values[0], phi)
}

fn monte_carlo(model: &dyn Model, row: &[f64], background: &Matrix, permutations: usize, seed: u64) -> (f64, Vec<f64>) {
    let d = row.len();
    let mut r = rng::seeded(seed);
    let mut order: Vec<usize> = (0..d).collect();
    let mut phi = vec![0.0; d];
    let mut base = 0.0;
    for b in background.row_iter() {
        base += model.output(b);
    }
    base /= background.rows() as f64;
    let mut z = vec![0.0; d];
    for _ in 0..permutations {
        order.shuffle(&mut r);
        for b in background.row_iter() {
            z.copy_from_slice(b);
            let mut prev = model.output(&z);
            for &i in &order {
                z[i] = row[i];
                let cur = model.output(&z);
                phi[i] += cur - prev;
                prev = cur;
            }
        }
    }
    let scale = (permutations * background.rows()) as f64;
    phi.iter_mut().for_each(|p| *p /= scale);
    (base, phi)
}

/// Shapley values of `row` against an interventional background.
pub fn shap_values(model: &dyn Model, row: &[f64], background: &Matrix, mode: ShapMode, seed: u64) -> Result<ExplanationReport> {
    let d = row.len();
    if background.rows() == 0 {
        return Err(FairnessError::InvalidArgument("shapley values need a nonempty background".into()));
    }
    if background.cols() != d {
        return Err(FairnessError::InvalidArgument(format!(
            "row has {d} features, background has {}",
            background.cols()
        )));
    }
    let (base, phi) = match mode {
        ShapMode::Exact if d > EXACT_FEATURE_LIMIT => {
            return Err(FairnessError::InvalidArgument(format!(
                "exact shapley values support at most {EXACT_FEATURE_LIMIT} features, got {d}; use montecarlo"
            )))
        }
        ShapMode::Exact => exact(model, row, background),
        ShapMode::MonteCarlo { permutations: 0 } => {
            return Err(FairnessError::InvalidArgument("montecarlo needs at least one permutation".into()))
        }
        ShapMode::MonteCarlo { permutations } => monte_carlo(model, row, background, permutations, seed),
    };
    let output = model.output(row);
    let residual = (base + phi.iter().sum::<f64>() - output).abs();
    Ok(ExplanationReport {
        method: ExplanationMethod::Shap,
        row: 0,
        weights: phi,
        intercept: base,
        model_output: output,
        fidelity: None,
        efficiency_residual: Some(residual),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::forest::{train_forest, ForestParams};
    use proptest::prelude::*;
    use rand::Rng as _;

    #[test]
    fn additive_model() {
        let f = |x: &[f64]| x[0] + x[1];
        let bg = Matrix::zeros(3, 2);
        let e = shap_values(&f, &[1.0, 1.0], &bg, ShapMode::Exact, 0).unwrap();
        assert_eq!(e.weights, vec![1.0, 1.0]);
        assert_eq!(e.intercept, 0.0);
    }

    #[test]
    fn too_many_features_for_exact() {
        let f = |x: &[f64]| x[0];
        let bg = Matrix::zeros(1, 16);
        let err = shap_values(&f, &[0.0; 16], &bg, ShapMode::Exact, 0).unwrap_err();
        assert!(err.to_string().contains("montecarlo"));
        assert!(shap_values(&f, &[0.0; 16], &Matrix::zeros(0, 16), ShapMode::MonteCarlo { permutations: 5 }, 0).is_err());
    }

    /// Shapley values from the permutation definition, averaging marginal
    /// contributions over all d! orderings.
    fn all_orderings(f: &dyn Model, row: &[f64], bg: &Matrix) -> Vec<f64> {
        fn perms(items: Vec<usize>) -> Vec<Vec<usize>> {
            if items.len() <= 1 {
                return vec![items];
            }
            let mut out = Vec::new();
            for i in 0..items.len() {
                let mut rest = items.clone();
                let head = rest.remove(i);
                for mut p in perms(rest) {
                    p.insert(0, head);
                    out.push(p);
                }
            }
            out
        }
        let d = row.len();
        let v = |mask: u32| {
            let mut z = vec![0.0; d];
            coalition_value(f, row, bg, mask, &mut z)
        };
        let all = perms((0..d).collect());
        let mut phi = vec![0.0; d];
        for p in &all {
            let mut mask = 0u32;
            for &i in p {
                phi[i] += v(mask | 1 << i) - v(mask);
                mask |= 1 << i;
            }
        }
        phi.iter().map(|x| x / all.len() as f64).collect()
    }

    fn forest_fixture(d: usize, seed: u64) -> (crate::fairness::ForestModel, Matrix) {
        let mut r = rng::seeded(seed);
        let n = 120;
        let data: Vec<f64> = (0..n * d).map(|_| r.random::<f64>()).collect();
        let x = Matrix::from_vec(n, d, data).unwrap();
        let y: Vec<usize> = x.row_iter().map(|row| usize::from(row[0] + 0.5 * row[1] > 0.8)).collect();
        let params = ForestParams {
            n_trees: 20,
            max_depth: 5,
            ..ForestParams::default()
        };
        (train_forest(&x, &y, &params, seed).unwrap(), x)
    }

    #[test]
    fn exact_matches_permutation_definition() {
        let (m, x) = forest_fixture(4, 1);
        let bg = x.select_rows(&[3, 4, 5, 6]);
        let e = shap_values(&m, x.row(0), &bg, ShapMode::Exact, 0).unwrap();
        let oracle = all_orderings(&m, x.row(0), &bg);
        for (a, b) in e.weights.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(e.efficiency_residual.unwrap() < 1e-6);
    }

    #[test]
    fn montecarlo_close_to_exact() {
        let (m, x) = forest_fixture(5, 2);
        let bg = x.select_rows(&[10, 20, 30, 40, 50]);
        let ex = shap_values(&m, x.row(1), &bg, ShapMode::Exact, 0).unwrap();
        let mc = shap_values(&m, x.row(1), &bg, ShapMode::MonteCarlo { permutations: 10_000 }, 7).unwrap();
        let dev = ex.weights.iter().zip(&mc.weights).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 0.02, "max deviation {dev}");
        assert!(mc.efficiency_residual.unwrap() < 1e-9);
    }

    #[test]
    fn symmetric_features_share_credit() {
        let f = |x: &[f64]| (x[0] * x[1]).min(0.7) + 0.1 * x[2];
        let bg = Matrix::from_rows(&[[0.0, 0.0, 0.3], [0.5, 0.5, 0.0]]).unwrap();
        let e = shap_values(&f, &[1.0, 1.0, 1.0], &bg, ShapMode::Exact, 0).unwrap();
        assert!((e.weights[0] - e.weights[1]).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn efficiency_holds(row in prop::collection::vec(0.0f64..1.0, 6), bg in prop::collection::vec(0.0f64..1.0, 18)) {
            let f = |x: &[f64]| (x[0] * x[3] + x[1].max(x[5]) - x[2] * x[4]).tanh();
            let bg = Matrix::from_vec(3, 6, bg).unwrap();
            let e = shap_values(&f, &row, &bg, ShapMode::Exact, 0).unwrap();
            prop_assert!(e.efficiency_residual.unwrap() < 1e-6);
        }
    }
}
