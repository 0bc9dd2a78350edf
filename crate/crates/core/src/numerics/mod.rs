//! Dense linear algebra and stochastic utilities.

mod gradcheck;
mod linalg;
mod matrix;
mod rng;

pub use gradcheck::{finite_diff_grad, relative_error, DEFAULT_STEP};
pub use linalg::{
    cholesky, pca_2d, solve_lower, solve_lower_transpose, sym_eig, SymEig, MAX_JACOBI_SWEEPS,
};
pub use matrix::Matrix;
pub use rng::{splitmix64, SeededRng};

use crate::error::{Error, Result};

/// Vectors with norm at or below this are treated as degenerate.
pub const DEGENERACY_EPS: f64 = 1e-12;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let n = norm(v);
    if !(n > DEGENERACY_EPS) {
        return Err(Error::DegenerateVector);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            context: "cosine",
            expected: a.len(),
            found: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if !(na > DEGENERACY_EPS && nb > DEGENERACY_EPS) {
        return Err(Error::DegenerateVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Row-wise unit normalisation; returns the normalised rows and the norms.
pub fn normalize_rows(m: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    let mut out = m.clone();
    let mut norms = Vec::with_capacity(m.rows());
    for i in 0..m.rows() {
        let row = out.row_mut(i);
        let n = norm(row);
        if !(n > DEGENERACY_EPS) {
            return Err(Error::DegenerateVector);
        }
        row.iter_mut().for_each(|x| *x /= n);
        norms.push(n);
    }
    Ok((out, norms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_three_four() {
        let v = l2_normalize(&[3.0, 4.0]).unwrap();
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);
        let again = l2_normalize(&v).unwrap();
        assert!((again[0] - v[0]).abs() < 1e-15 && (again[1] - v[1]).abs() < 1e-15);
        assert!(matches!(l2_normalize(&[1e-15, 0.0]), Err(Error::DegenerateVector)));
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[0.3, -2.0], &[0.3, -2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - 0.707_106_8).abs() < 1e-6);
        assert!(matches!(
            cosine(&[1.0], &[1.0, 0.0]),
            Err(Error::DimMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn cosine_matches_dot_of_normalized(
            a in prop::collection::vec(-10.0f64..10.0, 5),
            b in prop::collection::vec(-10.0f64..10.0, 5),
        ) {
            prop_assume!(norm(&a) > 1e-3 && norm(&b) > 1e-3);
            let na = l2_normalize(&a).unwrap();
            let nb = l2_normalize(&b).unwrap();
            prop_assert!((norm(&na) - 1.0).abs() < 1e-9);
            let c = cosine(&a, &b).unwrap();
            prop_assert!((c - dot(&na, &nb)).abs() < 1e-12);
            prop_assert_eq!(c, cosine(&b, &a).unwrap());
        }
    }
}
