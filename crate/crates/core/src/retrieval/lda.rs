use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numerics::{cholesky, normalize_rows, solve_lower, solve_lower_transpose, sym_eig, Matrix};

/// Default within-class shrinkage; prompt classes often hold one sample.
pub const DEFAULT_SHRINKAGE: f64 = 0.1;

/// Fisher discriminant directions fitted on one labelled set.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaProjection {
    /// Training mean, subtracted before projecting.
    pub mean: Vec<f64>,
    /// `d × r`, columns by descending discriminant eigenvalue.
    pub directions: Matrix,
    pub eigenvalues: Vec<f64>,
    pub classes: usize,
    pub shrinkage: f64,
}

impl LdaProjection {
    pub fn rank(&self) -> usize {
        self.directions.cols()
    }
}

/// Solves `S_b v = λ S_w v` with `S_w` shrunk towards a scaled identity:
/// `(1−γ)·S_w + γ·tr(S_w)/d·I`. When `S_w` vanishes entirely (one sample per
/// class) the total scatter supplies the identity scale instead.
///
/// Keeps at most `min(target_dim, classes − 1, d)` directions.
pub fn lda_fit<L: Ord>(x: &Matrix, labels: &[L], target_dim: usize, shrinkage: f64) -> Result<LdaProjection> {
    let (n, d) = (x.rows(), x.cols());
    if labels.len() != n {
        return Err(Error::DimMismatch {
            context: "lda labels",
            expected: n,
            found: labels.len(),
        });
    }
    if !(0.0..1.0).contains(&shrinkage) {
        return Err(Error::Config("shrinkage must lie in [0, 1)".into()));
    }
    if target_dim == 0 {
        return Err(Error::Config("lda target_dim must be positive".into()));
    }
    x.check_finite()?;
    let mut groups: BTreeMap<&L, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let classes = groups.len();
    if classes < 2 {
        return Err(Error::TooFew {
            what: "classes",
            needed: 2,
            found: classes,
        });
    }

    let mean: Vec<f64> = x.column_sums().iter().map(|s| s / n as f64).collect();
    let mut within = x.clone();
    let mut between = Matrix::zeros(classes, d);
    for (c, rows) in groups.values().enumerate() {
        let mut class_mean = vec![0.0; d];
        for &i in rows {
            for (m, v) in class_mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        class_mean.iter_mut().for_each(|m| *m /= rows.len() as f64);
        for &i in rows {
            for (w, m) in within.row_mut(i).iter_mut().zip(&class_mean) {
                *w -= m;
            }
        }
        let weight = (rows.len() as f64 / n as f64).sqrt();
        for ((b, m), g) in between.row_mut(c).iter_mut().zip(&class_mean).zip(&mean) {
            *b = weight * (m - g);
        }
    }

    let mut s_w = within.t_matmul(&within);
    s_w.scale(1.0 / n as f64);
    let mut scale = s_w.trace() / d as f64;
    if scale == 0.0 {
        let total: f64 = x
            .row_iter()
            .flat_map(|r| r.iter().zip(&mean).map(|(v, m)| (v - m) * (v - m)))
            .sum();
        scale = total / (n * d) as f64;
    }
    s_w.scale(1.0 - shrinkage);
    for i in 0..d {
        s_w[(i, i)] += shrinkage * scale;
    }
    let l = cholesky(&s_w)?;

    // S_b = BᵀB, so L⁻¹ S_b L⁻ᵀ = A·Aᵀ with A = L⁻¹Bᵀ, whose nonzero spectrum
    // is that of the small classes×classes matrix AᵀA.
    let a = solve_lower(&l, &between.transpose());
    let eig = sym_eig(&a.t_matmul(&a))?;
    let top = eig.values[0].max(0.0);
    let keep = eig
        .values
        .iter()
        .take(target_dim.min(classes - 1).min(d))
        .take_while(|&&v| v > top * 1e-12 && v > 0.0)
        .count();
    if keep == 0 {
        return Err(Error::TooFew {
            what: "discriminant directions",
            needed: 1,
            found: 0,
        });
    }
    let mut u = Matrix::zeros(d, keep);
    for k in 0..keep {
        let inv = 1.0 / eig.values[k].sqrt();
        for i in 0..d {
            u[(i, k)] = inv * (0..classes).map(|c| a[(i, c)] * eig.vectors[(c, k)]).sum::<f64>();
        }
    }
    let directions = solve_lower_transpose(&l, &u);
    directions.check_finite()?;
    Ok(LdaProjection {
        mean,
        directions,
        eigenvalues: eig.values[..keep].to_vec(),
        classes,
        shrinkage,
    })
}

/// Centres, projects onto the discriminant directions, and length-normalises.
pub fn lda_apply(projection: &LdaProjection, x: &Matrix) -> Result<Matrix> {
    if x.cols() != projection.mean.len() {
        return Err(Error::DimMismatch {
            context: "lda input",
            expected: projection.mean.len(),
            found: x.cols(),
        });
    }
    let mut centred = x.clone();
    let neg: Vec<f64> = projection.mean.iter().map(|m| -m).collect();
    centred.add_row_vector(&neg);
    Ok(normalize_rows(&centred.matmul(&projection.directions))?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{dot, norm, SeededRng};

    fn fisher_ratio(x: &Matrix, labels: &[usize], w: &[f64]) -> f64 {
        let proj: Vec<f64> = x.row_iter().map(|r| dot(r, w)).collect();
        let n = proj.len() as f64;
        let mean = proj.iter().sum::<f64>() / n;
        let mut between = 0.0;
        let mut within = 0.0;
        for c in 0..=*labels.iter().max().unwrap() {
            let vals: Vec<f64> = (0..proj.len()).filter(|&i| labels[i] == c).map(|i| proj[i]).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            between += vals.len() as f64 * (m - mean).powi(2);
            within += vals.iter().map(|v| (v - m).powi(2)).sum::<f64>();
        }
        between / within
    }

    #[test]
    fn separating_direction_two_classes() {
        let x = Matrix::from_rows(&[
            [0.0, 0.5],
            [0.0, -0.5],
            [0.0, 1.0],
            [0.0, -1.0],
            [1.0, 0.5],
            [1.0, -0.5],
            [1.0, 1.0],
            [1.0, -1.0],
        ]);
        let labels = [0, 0, 0, 0, 1, 1, 1, 1];
        let p = lda_fit(&x, &labels, 5, DEFAULT_SHRINKAGE).unwrap();
        assert_eq!(p.rank(), 1);
        let v = p.directions.column(0);
        let angle = (v[0].abs() / norm(&v)).clamp(-1.0, 1.0).acos();
        assert!(angle < 1e-6, "{angle}");
    }

    #[test]
    fn singular_within_scatter_without_shrinkage() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [3.0, 0.0], [3.0, 0.0]]);
        assert!(matches!(
            lda_fit(&x, &[0, 0, 1, 1], 1, 0.0),
            Err(Error::NotPositiveDefinite { .. })
        ));
        assert!(lda_fit(&x, &[0, 0, 1, 1], 1, 0.1).is_ok());
        assert!(matches!(
            lda_fit(&x, &[0, 0, 0, 0], 1, 0.1),
            Err(Error::TooFew { what: "classes", .. })
        ));
        assert!(lda_fit(&x, &[0, 0, 1, 1], 1, 1.0).is_err());
    }

    fn fixture(seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = SeededRng::new(seed);
        let (classes, per, d) = (4, 25, 6);
        let centres: Vec<Vec<f64>> = (0..classes)
            .map(|_| (0..d).map(|_| 2.0 * rng.normal()).collect())
            .collect();
        let scales: Vec<f64> = (0..d).map(|j| 0.3 + j as f64 * 0.5).collect();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, centre) in centres.iter().enumerate() {
            for _ in 0..per {
                rows.push(
                    (0..d)
                        .map(|j| centre[j] + scales[j] * rng.normal())
                        .collect::<Vec<_>>(),
                );
                labels.push(c);
            }
        }
        (Matrix::from_rows(&rows), labels)
    }

    #[test]
    fn beats_random_directions() {
        let (x, labels) = fixture(11);
        let p = lda_fit(&x, &labels, 1, 0.0).unwrap();
        let best = fisher_ratio(&x, &labels, &p.directions.column(0));
        let mut rng = SeededRng::new(99);
        for _ in 0..1000 {
            let w: Vec<f64> = (0..x.cols()).map(|_| rng.normal()).collect();
            assert!(fisher_ratio(&x, &labels, &w) <= best);
        }
    }

    #[test]
    fn matches_full_generalised_eigenproblem() {
        let (x, labels) = fixture(5);
        let p = lda_fit(&x, &labels, 3, 0.2).unwrap();
        assert_eq!(p.rank(), 3);
        // dense reference: eigenvectors of L⁻¹ S_b L⁻ᵀ
        let n = x.rows() as f64;
        let mean: Vec<f64> = x.column_sums().iter().map(|s| s / n).collect();
        let d = x.cols();
        let mut s_w = Matrix::zeros(d, d);
        let mut s_b = Matrix::zeros(d, d);
        for c in 0..4 {
            let rows: Vec<usize> = (0..x.rows()).filter(|&i| labels[i] == c).collect();
            let m: Vec<f64> = (0..d)
                .map(|j| rows.iter().map(|&i| x[(i, j)]).sum::<f64>() / rows.len() as f64)
                .collect();
            for a in 0..d {
                for b in 0..d {
                    s_b[(a, b)] += rows.len() as f64 * (m[a] - mean[a]) * (m[b] - mean[b]) / n;
                    for &i in &rows {
                        s_w[(a, b)] += (x[(i, a)] - m[a]) * (x[(i, b)] - m[b]) / n;
                    }
                }
            }
        }
        let scale = s_w.trace() / d as f64;
        s_w.scale(0.8);
        for i in 0..d {
            s_w[(i, i)] += 0.2 * scale;
        }
        let l = cholesky(&s_w).unwrap();
        let m = solve_lower(&l, &solve_lower(&l, &s_b).transpose());
        let eig = sym_eig(&m).unwrap();
        for k in 0..3 {
            assert!((eig.values[k] - p.eigenvalues[k]).abs() < 1e-9 * eig.values[0]);
            let reference = solve_lower_transpose(&l, &Matrix::from_vec(d, 1, eig.vectors.column(k)));
            let cos = dot(&reference.column(0), &p.directions.column(k)).abs()
                / (norm(&reference.column(0)) * norm(&p.directions.column(k)));
            assert!(cos > 1.0 - 1e-9);
        }
        let y = lda_apply(&p, &x).unwrap();
        assert_eq!((y.rows(), y.cols()), (100, 3));
        assert_eq!(y, lda_apply(&p, &x).unwrap());
        assert!(lda_apply(&p, &Matrix::zeros(2, 5)).is_err());
    }

    #[test]
    fn one_sample_per_class_uses_total_scatter() {
        let x = Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let p = lda_fit(&x, &["a", "b", "c"], 5, 0.1).unwrap();
        assert_eq!(p.rank(), 2);
    }
}
