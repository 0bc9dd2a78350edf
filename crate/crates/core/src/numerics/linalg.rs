//! Cholesky factorisation, triangular solves and a cyclic Jacobi eigensolver.
//!
//! These back the LDA alignment of the unlinked baseline and the 2-D PCA
//! export. Problem sizes are at most a few thousand, so everything is dense.

use std::cmp::Ordering;

use super::Matrix;
use crate::error::{Error, Result};

/// Absolute symmetry tolerance, scaled by `max(1, ‖A‖∞)`.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Sweep cap for [`sym_eig`].
pub const MAX_JACOBI_SWEEPS: usize = 100;

fn check_symmetric(a: &Matrix) -> Result<()> {
    if a.rows() != a.cols() {
        return Err(Error::DimMismatch {
            context: "square matrix",
            expected: a.rows(),
            found: a.cols(),
        });
    }
    a.check_finite()?;
    if !a.is_symmetric(SYMMETRY_TOL * a.norm_inf().max(1.0)) {
        return Err(Error::NotSymmetric);
    }
    Ok(())
}

/// Lower-triangular `L` with `L·Lᵀ = A`.
///
/// Fails with the index of the first non-positive pivot when `A` is not
/// positive definite.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    check_symmetric(a)?;
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L·X = B` for lower-triangular `L`.
pub fn solve_lower(l: &Matrix, b: &Matrix) -> Matrix {
    let n = l.rows();
    assert_eq!(n, b.rows());
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Solves `Lᵀ·X = B` for lower-triangular `L`.
pub fn solve_lower_transpose(l: &Matrix, b: &Matrix) -> Matrix {
    let n = l.rows();
    assert_eq!(n, b.rows());
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in i + 1..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEig {
    /// Descending.
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: Matrix,
}

/// Cyclic Jacobi eigensolver.
///
/// Eigenvalues come back in descending order. Each eigenvector is sign
/// normalised so its largest-magnitude component (first one on ties) is
/// positive; exactly equal eigenvalues are ordered by their eigenvectors,
/// lexicographically ascending.
pub fn sym_eig(a: &Matrix) -> Result<SymEig> {
    check_symmetric(a)?;
    let n = a.rows();
    let mut m = a.clone();
    // symmetrise exactly so rotations see a consistent matrix
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    let mut v = Matrix::identity(n);
    let frob: f64 = m.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();

    let mut converged = n <= 1 || frob == 0.0;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_JACOBI_SWEEPS {
            return Err(Error::NoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut m, &mut v, p, q, c, s);
            }
        }
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        converged = off <= 1e-15 * frob;
    }

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|k| {
            let mut vec = v.column(k);
            normalize_sign(&mut vec);
            (m[(k, k)], vec)
        })
        .collect();
    pairs.sort_by(|(la, va), (lb, vb)| {
        lb.partial_cmp(la)
            .unwrap_or(Ordering::Equal)
            .then_with(|| lexicographic(va, vb))
    });

    let mut vectors = Matrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (k, (val, vec)) in pairs.into_iter().enumerate() {
        values.push(val);
        for i in 0..n {
            vectors[(i, k)] = vec[i];
        }
    }
    Ok(SymEig { values, vectors })
}

/// Applies `M ← Jᵀ·M·J`, `V ← V·J` for the plane rotation at `(p, q)`.
fn rotate(m: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = m.rows();
    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

fn normalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Projects rows onto their two leading principal components.
///
/// Uses the n×n Gram matrix when there are fewer rows than columns, which
/// keeps the eigenproblem small for a few hundred high-dimensional rows.
pub fn pca_2d(x: &Matrix) -> Result<Matrix> {
    let (n, d) = (x.rows(), x.cols());
    if n == 0 {
        return Err(Error::EmptySet);
    }
    let mut centered = x.clone();
    let mean: Vec<f64> = centered.column_sums().iter().map(|s| -s / n as f64).collect();
    centered.add_row_vector(&mean);

    let mut out = Matrix::zeros(n, 2);
    if n <= d {
        let eig = sym_eig(&centered.matmul_t(&centered))?;
        for k in 0..2.min(n) {
            let scale = eig.values[k].max(0.0).sqrt();
            for i in 0..n {
                out[(i, k)] = eig.vectors[(i, k)] * scale;
            }
        }
    } else {
        let eig = sym_eig(&centered.t_matmul(&centered))?;
        for k in 0..2.min(d) {
            for i in 0..n {
                out[(i, k)] = (0..d).map(|j| centered[(i, j)] * eig.vectors[(j, k)]).sum();
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    fn random_symmetric(n: usize, seed: u64) -> Matrix {
        let mut rng = SeededRng::new(seed);
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let x = rng.uniform_range(-1.0, 1.0);
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
        }
        a
    }

    #[test]
    fn cholesky_two_by_two() {
        let a = Matrix::from_rows(&[[4.0, 2.0], [2.0, 3.0]]);
        let l = cholesky(&a).unwrap();
        assert!((l[(0, 0)] - 2.0).abs() < 1e-6);
        assert_eq!(l[(0, 1)], 0.0);
        assert!((l[(1, 0)] - 1.0).abs() < 1e-6);
        assert!((l[(1, 1)] - 1.414_213_6).abs() < 1e-6);
        let back = l.matmul_t(&l);
        let err = back
            .as_slice()
            .iter()
            .zip(a.as_slice())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(err < 1e-9 * a.norm_inf());
    }

    #[test]
    fn cholesky_identity_and_indefinite() {
        let l = cholesky(&Matrix::identity(4)).unwrap();
        assert_eq!(l, Matrix::identity(4));
        // eigenvalues 3 and -1
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]);
        match cholesky(&a) {
            Err(Error::NotPositiveDefinite { pivot: 1 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn triangular_solves_invert_cholesky() {
        let a = Matrix::from_rows(&[[4.0, 2.0, 0.4], [2.0, 3.0, 0.1], [0.4, 0.1, 2.0]]);
        let l = cholesky(&a).unwrap();
        let b = Matrix::from_rows(&[[1.0], [2.0], [3.0]]);
        let y = solve_lower(&l, &b);
        let x = solve_lower_transpose(&l, &y);
        let ax = a.matmul(&x);
        for i in 0..3 {
            assert!((ax[(i, 0)] - b[(i, 0)]).abs() < 1e-12);
        }
    }

    #[test]
    fn eig_two_by_two() {
        let a = Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]);
        let e = sym_eig(&a).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-9);
        assert!((e.values[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn eig_diagonal_is_identity_basis() {
        let a = Matrix::from_diag(&[1.0, 5.0, 3.0]);
        let e = sym_eig(&a).unwrap();
        assert_eq!(e.values, vec![5.0, 3.0, 1.0]);
        let expect = Matrix::from_rows(&[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert_eq!(e.vectors, expect);
    }

    #[test]
    fn eig_reconstructs_random_symmetric() {
        for seed in 0..5 {
            let a = random_symmetric(8, seed);
            let e = sym_eig(&a).unwrap();
            let scale = a.norm_inf();
            let v = &e.vectors;
            let recon = v.matmul(&Matrix::from_diag(&e.values)).matmul_t(v);
            for (x, y) in recon.as_slice().iter().zip(a.as_slice()) {
                assert!((x - y).abs() < 1e-8 * scale);
            }
            let gram = v.t_matmul(v);
            for i in 0..8 {
                for j in 0..8 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((gram[(i, j)] - want).abs() < 1e-8);
                }
            }
            for k in 0..8 {
                let vk = v.column(k);
                for i in 0..8 {
                    let av: f64 = (0..8).map(|j| a[(i, j)] * vk[j]).sum();
                    assert!((av - e.values[k] * vk[i]).abs() < 1e-8 * scale);
                }
            }
            let sum: f64 = e.values.iter().sum();
            assert!((sum - a.trace()).abs() < 1e-8 * scale);
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]);
        assert!(matches!(sym_eig(&a), Err(Error::NotSymmetric)));
    }

    #[test]
    fn pca_separates_along_dominant_axis() {
        let x = Matrix::from_rows(&[
            [-3.0, 0.1, 0.0],
            [-1.0, -0.1, 0.0],
            [1.0, 0.1, 0.0],
            [3.0, -0.1, 0.0],
        ]);
        let p = pca_2d(&x).unwrap();
        let xs: Vec<f64> = p.column(0);
        assert!(xs.windows(2).all(|w| w[0] < w[1]) || xs.windows(2).all(|w| w[0] > w[1]));
        assert!((xs[0].abs() - 3.0).abs() < 1e-2);
    }
}
