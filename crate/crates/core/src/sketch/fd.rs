use crate::numcore::{svd, Matrix};

use super::{Result, SketchError};

/// Shrinks `buffer` by `delta` (subtracted from every squared singular
/// value) and returns the surviving rows `sqrt(σ² − δ)·vᵀ`, at most `keep`.
fn shrink(buffer: &[Vec<f64>], cols: usize, delta_index: usize, keep: usize) -> Result<Vec<Vec<f64>>> {
    let m = Matrix::from_rows(buffer)?;
    let s = svd(&m)?;
    let delta = s
        .singular_values
        .get(delta_index)
        .map(|x| x * x)
        .unwrap_or(0.0);
    let mut out = Vec::new();
    for (j, sigma) in s.singular_values.iter().enumerate().take(keep) {
        let shrunk = (sigma * sigma - delta).max(0.0).sqrt();
        if shrunk == 0.0 {
            break;
        }
        out.push((0..cols).map(|c| shrunk * s.v[(c, j)]).collect());
    }
    Ok(out)
}

/// Frequent-directions sketch with `ell` rows: `BᵀB ≈ AᵀA` and
/// `‖AᵀA − BᵀB‖₂ ≤ 2‖A‖_F²/ell`. Rows of the result are mutually orthogonal
/// and ordered by decreasing norm; unused rows are zero.
pub fn frequent_directions(a: &Matrix, ell: usize) -> Result<Matrix> {
    if ell < 2 {
        return Err(SketchError::InvalidArgument(format!("sketch needs at least 2 rows, got {ell}")));
    }
    let cols = a.cols();
    let mut buffer: Vec<Vec<f64>> = Vec::with_capacity(2 * ell);
    for row in a.row_iter() {
        if row.iter().all(|&x| x == 0.0) {
            continue;
        }
        buffer.push(row.to_vec());
        if buffer.len() == 2 * ell {
            buffer = shrink(&buffer, cols, ell - 1, ell - 1)?;
        }
    }
    let mut b = Matrix::zeros(ell, cols);
    if buffer.is_empty() {
        return Ok(b);
    }
    // final compaction: shrinking by the (ell+1)-th value leaves at most ell rows
    let rows = shrink(&buffer, cols, ell, ell)?;
    for (i, r) in rows.iter().enumerate() {
        b.row_mut(i).copy_from_slice(r);
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::rng;
    use rand::Rng as _;

    fn spectral_error(a: &Matrix, b: &Matrix) -> f64 {
        let d = a.gram().sub(&b.gram()).unwrap();
        let n = d.rows();
        let m = nalgebra::DMatrix::from_row_slice(n, n, d.data());
        m.symmetric_eigen().eigenvalues.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
    }

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut r = rng::seeded(seed);
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn low_rank_is_exact() {
        let basis = random(3, 12, 1);
        let coef = random(40, 3, 2);
        let a = coef.matmul(&basis).unwrap();
        let b = frequent_directions(&a, 4).unwrap();
        assert!(spectral_error(&a, &b) < 1e-8 * a.frobenius_norm().powi(2).max(1.0));
    }

    #[test]
    fn zero_input_gives_zero_sketch() {
        let b = frequent_directions(&Matrix::zeros(5, 3), 2).unwrap();
        assert_eq!((b.rows(), b.cols()), (2, 3));
        assert!(b.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn random_200x30_meets_bound() {
        let a = random(200, 30, 3);
        let b = frequent_directions(&a, 10).unwrap();
        let bound = 2.0 * a.frobenius_norm().powi(2) / 10.0;
        assert!(spectral_error(&a, &b) <= bound);
    }

    #[test]
    fn fewer_rows_than_sketch() {
        let a = random(3, 5, 9);
        let b = frequent_directions(&a, 8).unwrap();
        assert_eq!(b.rows(), 8);
        assert!(spectral_error(&a, &b) < 1e-9);
        assert!(frequent_directions(&a, 1).is_err());
    }
}
