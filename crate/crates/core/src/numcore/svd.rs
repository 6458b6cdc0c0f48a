use super::{dot, Matrix, NumError, Result};

/// Thin SVD `A = U · diag(s) · Vᵀ` with `k = min(rows, cols)` components.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `rows × k`, orthonormal columns.
    pub u: Matrix,
    /// Non-increasing, non-negative.
    pub singular_values: Vec<f64>,
    /// `cols × k`, orthonormal columns.
    pub v: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        let k = self.singular_values.len();
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for j in 0..k {
                us[(i, j)] *= self.singular_values[j];
            }
        }
        us.matmul(&self.v.transpose())
            .expect("svd factors have consistent shapes")
    }
}

const MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(a: &Matrix) -> Result<SvdResult> {
    if !a.is_finite() {
        return Err(NumError::InvalidArgument(
            "svd input contains non-finite entries".into(),
        ));
    }
    if a.rows() < a.cols() {
        let t = svd_tall(&a.transpose());
        return Ok(SvdResult {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }
    Ok(svd_tall(a))
}

fn svd_tall(a: &Matrix) -> SvdResult {
    let (m, n) = (a.rows(), a.cols());
    // column-major working copies
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = w.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let sigma_max = norms.iter().cloned().fold(0.0, f64::max);
    let negligible = sigma_max * f64::EPSILON * (m.max(n) as f64);

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut pending: Vec<usize> = Vec::new();
    let mut singular_values = Vec::with_capacity(n);
    for (slot, &j) in order.iter().enumerate() {
        let s = norms[j];
        singular_values.push(s);
        if s > negligible && s > 0.0 {
            u_cols.push(w[j].iter().map(|x| x / s).collect());
        } else {
            u_cols.push(vec![0.0; m]);
            pending.push(slot);
        }
    }
    complete_orthonormal(&mut u_cols, &pending, m);

    let mut u = Matrix::zeros(m, n);
    let mut vm = Matrix::zeros(n, n);
    for (slot, &j) in order.iter().enumerate() {
        for i in 0..m {
            u[(i, slot)] = u_cols[slot][i];
        }
        for i in 0..n {
            vm[(i, slot)] = v[j][i];
        }
    }
    SvdResult {
        u,
        singular_values,
        v: vm,
    }
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fills the `pending` columns with unit vectors orthogonal to every other column.
fn complete_orthonormal(cols: &mut [Vec<f64>], pending: &[usize], m: usize) {
    let mut basis_candidate = 0;
    for &slot in pending {
        loop {
            assert!(basis_candidate < m, "cannot complete orthonormal basis");
            let mut e = vec![0.0; m];
            e[basis_candidate] = 1.0;
            basis_candidate += 1;
            // two Gram-Schmidt passes for stability
            for _ in 0..2 {
                for (k, c) in cols.iter().enumerate() {
                    if k == slot || (pending.contains(&k) && c.iter().all(|x| *x == 0.0)) {
                        continue;
                    }
                    let proj = dot(&e, c);
                    for (ei, ci) in e.iter_mut().zip(c) {
                        *ei -= proj * ci;
                    }
                }
            }
            let nrm = dot(&e, &e).sqrt();
            if nrm > 1e-6 {
                cols[slot] = e.into_iter().map(|x| x / nrm).collect();
                break;
            }
        }
    }
}
