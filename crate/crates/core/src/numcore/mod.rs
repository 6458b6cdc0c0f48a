//! Dense linear algebra used by the sketching, link prediction and fairness
//! modules: a row-major `Matrix`, a one-sided Jacobi SVD, cosine similarity
//! and seeded random streams.

mod matrix;
pub mod rng;
mod svd;

pub use matrix::Matrix;
pub use svd::{svd, SvdResult};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, NumError>;

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// Cosine similarity, defined as 0 when either vector has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(NumError::InvalidArgument(format!(
            "cosine of vectors with lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(cosine(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant(
            u in prop::collection::vec(-10.0f64..10.0, 4),
            v in prop::collection::vec(-10.0f64..10.0, 4),
            alpha in 0.01f64..100.0,
        ) {
            let c = cosine(&u, &v).unwrap();
            prop_assert!((c - cosine(&v, &u).unwrap()).abs() < 1e-12);
            let scaled: Vec<f64> = u.iter().map(|x| x * alpha).collect();
            prop_assert!((c - cosine(&scaled, &v).unwrap()).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&c));
        }
    }
}
