use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{normalize_rows, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EerReport {
    /// Percent.
    pub eer: f64,
    pub threshold: f64,
    pub n_target: usize,
    pub n_nontarget: usize,
}

/// EER from scored trials, interpolated linearly between the two operating
/// points where the false-accept and false-reject curves cross.
///
/// Operating point `j` accepts scores `≥ t_j` over the ascending distinct
/// scores, followed by a final point that accepts nothing.
pub fn eer_from_trials(trials: &mut [(f64, bool)]) -> Result<EerReport> {
    let n_target = trials.iter().filter(|t| t.1).count();
    let n_nontarget = trials.len() - n_target;
    if n_target == 0 {
        return Err(Error::NoTargetTrials);
    }
    if n_nontarget == 0 {
        return Err(Error::TooFew {
            what: "non-target trials",
            needed: 1,
            found: 0,
        });
    }
    trials.sort_by(|a, b| a.0.total_cmp(&b.0));

    // (threshold, far, frr), far non-increasing and frr non-decreasing
    let mut points = Vec::new();
    let (mut rejected_targets, mut rejected_nontargets) = (0usize, 0usize);
    let mut i = 0;
    while i < trials.len() {
        let t = trials[i].0;
        points.push((
            t,
            (n_nontarget - rejected_nontargets) as f64 / n_nontarget as f64,
            rejected_targets as f64 / n_target as f64,
        ));
        while i < trials.len() && trials[i].0 == t {
            if trials[i].1 {
                rejected_targets += 1;
            } else {
                rejected_nontargets += 1;
            }
            i += 1;
        }
    }
    points.push((trials[trials.len() - 1].0, 0.0, 1.0));

    let j = points
        .iter()
        .position(|p| p.2 >= p.1)
        .expect("final point has frr 1 >= far 0");
    let (eer, threshold) = if j == 0 {
        (points[0].1, points[0].0)
    } else {
        let (a, b) = (points[j - 1], points[j]);
        let (da, db) = (a.1 - a.2, b.1 - b.2);
        let alpha = da / (da - db);
        (a.1 + alpha * (b.1 - a.1), a.0 + alpha * (b.0 - a.0))
    };
    Ok(EerReport {
        eer: 100.0 * eer,
        threshold,
        n_target,
        n_nontarget,
    })
}

/// EER of cosine scoring over all prompt pairs; a pair is a target trial
/// when both prompts belong to the same speaker.
pub fn text_eer<L: PartialEq>(embeddings: &Matrix, labels: &[L]) -> Result<EerReport> {
    if labels.len() != embeddings.rows() {
        return Err(Error::DimMismatch {
            context: "eer labels",
            expected: embeddings.rows(),
            found: labels.len(),
        });
    }
    let (unit, _) = normalize_rows(embeddings)?;
    let gram = unit.matmul_t(&unit);
    let n = labels.len();
    let mut trials = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            trials.push((gram[(i, j)], labels[i] == labels[j]));
        }
    }
    eer_from_trials(&mut trials)
}
