use super::contrastive::check_same_batch;
use super::{BatchLabels, LossGrad, SimilarityMatrix};
use crate::error::{Error, Result};

fn check_labels(s: &SimilarityMatrix, labels: &BatchLabels) -> Result<()> {
    if labels.len() != s.len() {
        return Err(Error::DimMismatch {
            context: "batch labels",
            expected: s.len(),
            found: labels.len(),
        });
    }
    Ok(())
}

/// Supervised contrastive loss over rows of `S`, summed over anchors.
///
/// Positives of anchor `i` are all `j` with the same label, `i` included.
/// Gradient: `(softmax − 1[P(i)]/|P(i)|) / τ`.
pub fn sup_con_directional(s: &SimilarityMatrix, labels: &BatchLabels) -> Result<LossGrad> {
    check_labels(s, labels)?;
    let n = s.len();
    let tau = s.temperature();
    let (mut grad, lse) = s.softmax_rows();
    let mut loss = 0.0;
    for i in 0..n {
        let positives = labels.positives(i);
        let weight = 1.0 / positives.len() as f64;
        for &p in &positives {
            loss += weight * (lse[i] - s.values()[(i, p)] / tau);
            grad[(i, p)] -= weight;
        }
    }
    grad.scale(1.0 / tau);
    Ok(LossGrad { loss, grad })
}

/// Average of the two directional supervised losses, over `S` and `Sᵀ`.
pub fn sup_cts_pair(s: &SimilarityMatrix, labels: &BatchLabels) -> Result<LossGrad> {
    let forward = sup_con_directional(s, labels)?;
    let backward = sup_con_directional(&s.transpose(), labels)?;
    let mut grad = forward.grad;
    grad.add_assign(&backward.grad.transpose());
    grad.scale(0.5);
    Ok(LossGrad {
        loss: 0.5 * (forward.loss + backward.loss),
        grad,
    })
}

/// Supervised pair losses at both levels, summed.
pub fn sup_cts_total(
    projection: &SimilarityMatrix,
    transform: &SimilarityMatrix,
    labels: &BatchLabels,
) -> Result<super::CtsTotal> {
    check_same_batch(projection, transform)?;
    let p = sup_cts_pair(projection, labels)?;
    let t = sup_cts_pair(transform, labels)?;
    Ok(super::CtsTotal {
        loss: p.loss + t.loss,
        projection: p,
        transform: t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::test_support::random_matrix;
    use crate::losses::{cts_total, info_nce_directional};
    use crate::numerics::{finite_diff_grad, relative_error, Matrix, SeededRng, DEFAULT_STEP};
    use proptest::prelude::*;

    fn sim(m: Matrix, tau: f64) -> SimilarityMatrix {
        SimilarityMatrix::new(m, tau).unwrap()
    }

    fn distinct(n: usize) -> BatchLabels {
        BatchLabels((0..n).collect())
    }

    fn symmetric(n: usize, seed: u64) -> Matrix {
        let m = random_matrix(n, n, seed);
        let mut s = m.transpose();
        s.add_assign(&m);
        s.scale(0.5);
        s
    }

    #[test]
    fn same_speaker_pair_hand_value() {
        let s = sim(Matrix::identity(2), 1.0);
        let r = sup_con_directional(&s, &BatchLabels(vec![0, 0])).unwrap();
        assert!((r.loss - 1.626_523_4).abs() < 1e-6);
    }

    #[test]
    fn distinct_labels_sum_info_nce() {
        for n in [1usize, 3, 7] {
            let s = sim(random_matrix(n, n, n as u64), 0.2);
            let sup = sup_con_directional(&s, &distinct(n)).unwrap();
            let info = info_nce_directional(&s);
            assert!((sup.loss - n as f64 * info.loss).abs() < 1e-9);

            let t = sim(random_matrix(n, n, 50 + n as u64), 0.2);
            let total = sup_cts_total(&s, &t, &distinct(n)).unwrap();
            let plain = cts_total(&s, &t).unwrap();
            assert!((total.loss - n as f64 * plain.loss).abs() < 1e-9);
        }
    }

    #[test]
    fn symmetric_grouped_is_twice_one_direction() {
        let s = sim(symmetric(6, 4), 0.3);
        let labels = BatchLabels(vec![0, 1, 0, 2, 1, 0]);
        let total = sup_cts_total(&s, &s, &labels).unwrap();
        let one = sup_con_directional(&s, &labels).unwrap();
        assert!((total.loss - 2.0 * one.loss).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let labels = BatchLabels(vec![0, 1, 0, 2, 1, 0]);
        let s = sim(random_matrix(6, 6, 13), 0.4);
        let check = |f: &dyn Fn(&SimilarityMatrix) -> f64, analytic: &Matrix| {
            let numeric = finite_diff_grad(
                |theta| f(&sim(Matrix::from_vec(6, 6, theta.to_vec()), 0.4)),
                s.values().as_slice(),
                DEFAULT_STEP,
            )
            .unwrap();
            assert!(relative_error(analytic.as_slice(), &numeric) < 1e-6);
        };
        let g = sup_con_directional(&s, &labels).unwrap().grad;
        check(&|x| sup_con_directional(x, &labels).unwrap().loss, &g);
        let g = sup_cts_pair(&s, &labels).unwrap().grad;
        check(&|x| sup_cts_pair(x, &labels).unwrap().loss, &g);
    }

    #[test]
    fn label_length_checked() {
        let s = sim(Matrix::identity(3), 1.0);
        assert!(sup_con_directional(&s, &BatchLabels(vec![0, 1])).is_err());
    }

    proptest! {
        #[test]
        fn permutation_invariant(seed in 0u64..500, n in 2usize..7) {
            let mut rng = SeededRng::new(seed);
            let m = random_matrix(n, n, seed);
            let labels: Vec<usize> = (0..n).map(|_| rng.below(3) as usize).collect();
            let mut perm: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut perm);
            let pm = Matrix::from_vec(
                n,
                n,
                (0..n * n).map(|k| m[(perm[k / n], perm[k % n])]).collect(),
            );
            let pl: Vec<usize> = perm.iter().map(|&i| labels[i]).collect();
            let a = sup_cts_pair(&sim(m, 0.3), &BatchLabels(labels)).unwrap().loss;
            let b = sup_cts_pair(&sim(pm, 0.3), &BatchLabels(pl)).unwrap().loss;
            prop_assert!((a - b).abs() < 1e-10);
            prop_assert!(a >= 0.0);
        }
    }
}
