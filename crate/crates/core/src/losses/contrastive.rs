use super::{LossGrad, SimilarityMatrix};
use crate::error::{Error, Result};

/// Mean over anchors `i` of `−log softmax(S_i/τ)_i`.
///
/// Gradient: `(softmax − I) / (N·τ)`.
pub fn info_nce_directional(s: &SimilarityMatrix) -> LossGrad {
    let n = s.len();
    let (mut grad, lse) = s.softmax_rows();
    let tau = s.temperature();
    let mut loss = 0.0;
    for i in 0..n {
        loss += lse[i] - s.values()[(i, i)] / tau;
        grad[(i, i)] -= 1.0;
    }
    grad.scale(1.0 / (n as f64 * tau));
    LossGrad {
        loss: loss / n as f64,
        grad,
    }
}

/// Average of the two directional losses, over `S` and `Sᵀ`.
pub fn cts_pair(s: &SimilarityMatrix) -> LossGrad {
    let forward = info_nce_directional(s);
    let backward = info_nce_directional(&s.transpose());
    let mut grad = forward.grad;
    grad.add_assign(&backward.grad.transpose());
    grad.scale(0.5);
    LossGrad {
        loss: 0.5 * (forward.loss + backward.loss),
        grad,
    }
}

/// Pair losses at the projection and transform levels, summed.
#[derive(Debug, Clone)]
pub struct CtsTotal {
    pub loss: f64,
    pub projection: LossGrad,
    pub transform: LossGrad,
}

pub fn cts_total(projection: &SimilarityMatrix, transform: &SimilarityMatrix) -> Result<CtsTotal> {
    check_same_batch(projection, transform)?;
    let p = cts_pair(projection);
    let t = cts_pair(transform);
    Ok(CtsTotal {
        loss: p.loss + t.loss,
        projection: p,
        transform: t,
    })
}

pub(super) fn check_same_batch(a: &SimilarityMatrix, b: &SimilarityMatrix) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            context: "projection/transform batch",
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}
