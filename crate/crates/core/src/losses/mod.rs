//! Training objectives with analytic gradients.
//!
//! Contrastive losses are functions of a similarity matrix `S` (dot products
//! of unit rows, `S[i][j] = a_i · b_j`) and a temperature `τ`. Each returns
//! `∂L/∂S`; the caller pulls that back to the embeddings (`∂L/∂a = G·b`,
//! `∂L/∂b = Gᵀ·a`) and to `log τ` via [`SimilarityMatrix::log_temperature_grad`].
//!
//! Aggregation: InfoNCE and its symmetric pair average over the batch;
//! the supervised contrastive loss sums over anchors. The supervised path is
//! therefore N times larger on the same batch.

mod aam;
mod contrastive;
mod supcon;

pub use aam::{aam_softmax, AamOutput};
pub use contrastive::{cts_pair, cts_total, info_nce_directional, CtsTotal};
pub use supcon::{sup_con_directional, sup_cts_pair, sup_cts_total};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// `S = a·bᵀ` together with the temperature it is scored at.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    values: Matrix,
    temperature: f64,
}

impl SimilarityMatrix {
    pub fn new(values: Matrix, temperature: f64) -> Result<Self> {
        if values.rows() != values.cols() {
            return Err(Error::DimMismatch {
                context: "similarity matrix",
                expected: values.rows(),
                found: values.cols(),
            });
        }
        if values.rows() == 0 {
            return Err(Error::TooFew {
                what: "batch rows",
                needed: 1,
                found: 0,
            });
        }
        if !values.is_finite() {
            return Err(Error::NonFiniteSimilarity);
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::Config("temperature must be positive".into()));
        }
        Ok(Self {
            values,
            temperature,
        })
    }

    /// Similarities between aligned rows of `a` and `b`.
    pub fn from_embeddings(a: &Matrix, b: &Matrix, temperature: f64) -> Result<Self> {
        if a.rows() != b.rows() {
            return Err(Error::DimMismatch {
                context: "paired batch",
                expected: a.rows(),
                found: b.rows(),
            });
        }
        Self::new(a.matmul_t(b), temperature)
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn transpose(&self) -> Self {
        Self {
            values: self.values.transpose(),
            temperature: self.temperature,
        }
    }

    /// `∂L/∂log τ` given `∂L/∂S`, valid because `τ` only enters as `S/τ`.
    pub fn log_temperature_grad(&self, grad: &Matrix) -> f64 {
        -crate::numerics::dot(grad.as_slice(), self.values.as_slice())
    }

    /// Row-wise softmax of `S/τ` and the log-partition of each row.
    fn softmax_rows(&self) -> (Matrix, Vec<f64>) {
        let n = self.len();
        let mut probs = Matrix::zeros(n, n);
        let mut lse = Vec::with_capacity(n);
        for i in 0..n {
            let logits: Vec<f64> = self
                .values
                .row(i)
                .iter()
                .map(|s| s / self.temperature)
                .collect();
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for (p, l) in probs.row_mut(i).iter_mut().zip(&logits) {
                *p = (l - max).exp();
                total += *p;
            }
            probs.row_mut(i).iter_mut().for_each(|p| *p /= total);
            lse.push(max + total.ln());
        }
        (probs, lse)
    }
}

/// A scalar loss and its gradient with respect to the similarity matrix.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Matrix,
}

/// Speaker class index for every row of a batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchLabels(pub Vec<usize>);

impl BatchLabels {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Indices sharing row `i`'s label, including `i` itself.
    pub fn positives(&self, i: usize) -> Vec<usize> {
        let label = self.0[i];
        (0..self.0.len()).filter(|&j| self.0[j] == label).collect()
    }
}

/// `L = L_cts + λ·L_spk`.
pub fn regularized_total(cts_loss: f64, aam_loss: f64, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Config("lambda must be >= 0".into()));
    }
    Ok(cts_loss + lambda * aam_loss)
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regularized_examples() {
        assert_eq!(regularized_total(0.6265, 0.3133, 0.0).unwrap(), 0.6265);
        let v = regularized_total(0.6265, 0.3133, 0.1).unwrap();
        assert!((v - 0.6578).abs() < 1e-4);
        assert!(regularized_total(1.0, 1.0, -0.1).is_err());
        // dL/dλ equals the AAM term
        let h = 1e-5;
        let d = (regularized_total(0.7, 0.3, 0.1 + h).unwrap()
            - regularized_total(0.7, 0.3, 0.1 - h).unwrap())
            / (2.0 * h);
        assert!((d - 0.3).abs() < 1e-9);
    }

    #[test]
    fn similarity_validation() {
        assert!(SimilarityMatrix::new(Matrix::zeros(2, 3), 1.0).is_err());
        assert!(SimilarityMatrix::new(Matrix::zeros(0, 0), 1.0).is_err());
        assert!(SimilarityMatrix::new(Matrix::identity(2), 0.0).is_err());
        let mut m = Matrix::identity(2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(
            SimilarityMatrix::new(m, 1.0),
            Err(Error::NonFiniteSimilarity)
        ));
    }

    #[test]
    fn positives_include_self() {
        let l = BatchLabels(vec![3, 1, 3, 2]);
        assert_eq!(l.positives(0), vec![0, 2]);
        assert_eq!(l.positives(1), vec![1]);
    }
}
