use super::BatchLabels;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

const COSINE_SLACK: f64 = 1e-6;
const MIN_SINE: f64 = 1e-12;

/// Loss and gradients of the angular-margin classifier.
#[derive(Debug, Clone)]
pub struct AamOutput {
    pub loss: f64,
    pub grad_embeddings: Matrix,
    pub grad_weights: Matrix,
}

/// `cos(θ + m)` and its derivative in `cos θ`, with the usual fallback
/// `cos θ − m·sin m` once `θ + m` passes `π`.
fn margin_cosine(c: f64, margin: f64) -> (f64, f64) {
    let (sin_m, cos_m) = margin.sin_cos();
    if c > -cos_m {
        let sin_t = (1.0 - c * c).max(0.0).sqrt();
        let value = c * cos_m - sin_t * sin_m;
        let deriv = cos_m + sin_m * c / sin_t.max(MIN_SINE);
        (value, deriv)
    } else {
        (c - margin * sin_m, 1.0)
    }
}

/// Additive angular margin softmax over cosines between unit embeddings
/// (`N×d`) and unit class weights (`K×d`), averaged over the batch.
pub fn aam_softmax(
    embeddings: &Matrix,
    labels: &BatchLabels,
    weights: &Matrix,
    margin: f64,
    scale: f64,
) -> Result<AamOutput> {
    let n = embeddings.rows();
    let classes = weights.rows();
    if n == 0 {
        return Err(Error::TooFew {
            what: "batch rows",
            needed: 1,
            found: 0,
        });
    }
    if labels.len() != n {
        return Err(Error::DimMismatch {
            context: "batch labels",
            expected: n,
            found: labels.len(),
        });
    }
    if weights.cols() != embeddings.cols() {
        return Err(Error::DimMismatch {
            context: "aam weights",
            expected: embeddings.cols(),
            found: weights.cols(),
        });
    }
    if let Some(&label) = labels.0.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }

    let mut cosines = embeddings.matmul_t(weights);
    for c in cosines.as_mut_slice() {
        if !c.is_finite() {
            return Err(Error::NonFiniteSimilarity);
        }
        if c.abs() > 1.0 + COSINE_SLACK {
            return Err(Error::CosineOutOfRange { value: *c });
        }
        *c = c.clamp(-1.0, 1.0);
    }

    let mut grad = Matrix::zeros(n, classes);
    let mut loss = 0.0;
    for i in 0..n {
        let y = labels.0[i];
        let (target, target_deriv) = margin_cosine(cosines[(i, y)], margin);
        let logits: Vec<f64> = (0..classes)
            .map(|j| scale * if j == y { target } else { cosines[(i, j)] })
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logits.iter().map(|z| (z - max).exp()).sum();
        loss += max + total.ln() - logits[y];
        let row = grad.row_mut(i);
        for j in 0..classes {
            let p = (logits[j] - max).exp() / total;
            row[j] = if j == y {
                (p - 1.0) * scale * target_deriv
            } else {
                p * scale
            };
        }
    }
    grad.scale(1.0 / n as f64);
    Ok(AamOutput {
        loss: loss / n as f64,
        grad_embeddings: grad.matmul(weights),
        grad_weights: grad.t_matmul(embeddings),
    })
}
