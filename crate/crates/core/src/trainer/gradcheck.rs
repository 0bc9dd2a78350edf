use serde::Serialize;

use super::objective::{evaluate, Criterion};
use super::PairedBatch;
use crate::error::{Error, Result};
use crate::linker::{init_params, Activation, LinkerConfig};
use crate::losses::BatchLabels;
use crate::numerics::{finite_diff_grad, relative_error, Matrix, SeededRng, DEFAULT_STEP};

pub const GRAD_CHECK_TOLERANCE: f64 = 1e-4;

const BATCH: usize = 4;
const LAMBDA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckEntry {
    pub loss: String,
    /// Largest per-tensor relative error.
    pub max_relative_error: f64,
    pub worst_tensor: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub seed: u64,
    pub tolerance: f64,
    pub step: f64,
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}

fn check_config(activation: Activation) -> LinkerConfig {
    LinkerConfig {
        dim_speaker_in: 6,
        dim_text_in: 5,
        common_dim: 16,
        n_transform_layers: 2,
        activation,
        n_speakers_train: 3,
        ..LinkerConfig::default()
    }
}

fn check_batch(seed: u64, config: &LinkerConfig) -> PairedBatch {
    let mut rng = SeededRng::derive(seed, 1);
    let mut random = |cols: usize| {
        Matrix::from_vec(BATCH, cols, (0..BATCH * cols).map(|_| rng.normal()).collect())
    };
    PairedBatch {
        speaker_rows: random(config.dim_speaker_in),
        text_rows: random(config.dim_text_in),
        labels: BatchLabels(vec![0, 1, 0, 2]),
        pairs: (0..BATCH).map(|i| (i, i)).collect(),
    }
}

/// Compares analytic gradients of every loss against central differences,
/// through the full linker forward pass on a seeded 4-sample batch.
pub fn grad_check(activation: Activation, seed: u64, tolerance: f64) -> Result<GradCheckReport> {
    if !(tolerance > 0.0) {
        return Err(Error::Config("tolerance must be positive".into()));
    }
    let config = check_config(activation);
    let params = init_params(&config, seed)?;
    let batch = check_batch(seed, &config);
    let theta = params.flatten();

    let mut entries = Vec::new();
    for criterion in Criterion::ALL {
        let (_, analytic) = evaluate(&params, &config, criterion, LAMBDA, &batch)?;
        let mut probe = params.clone();
        let numeric = finite_diff_grad(
            |x| {
                probe.assign_flat(x);
                evaluate(&probe, &config, criterion, LAMBDA, &batch)
                    .map(|(o, _)| o.loss)
                    .unwrap_or(f64::NAN)
            },
            &theta,
            DEFAULT_STEP,
        )?;

        let mut worst = (0.0, String::new());
        let mut offset = 0;
        for (name, a) in analytic.tensors() {
            let err = relative_error(a, &numeric[offset..offset + a.len()]);
            offset += a.len();
            if err > worst.0 || worst.1.is_empty() {
                worst = (err, name);
            }
        }
        entries.push(GradCheckEntry {
            loss: criterion.name().to_string(),
            max_relative_error: worst.0,
            worst_tensor: worst.1,
            pass: worst.0 < tolerance,
        });
    }
    Ok(GradCheckReport {
        seed,
        tolerance,
        step: DEFAULT_STEP,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_losses_pass_at_default_tolerance() {
        for activation in [Activation::Relu, Activation::Gelu] {
            let r = grad_check(activation, 0, GRAD_CHECK_TOLERANCE).unwrap();
            assert_eq!(r.entries.len(), 5);
            for e in &r.entries {
                assert!(e.pass, "{activation:?} {e:?}");
            }
        }
    }

    #[test]
    fn impossible_tolerance_fails() {
        let r = grad_check(Activation::Relu, 1, 1e-12).unwrap();
        assert!(!r.all_pass());
        assert!(r.entries.iter().all(|e| e.max_relative_error > 0.0));
    }

    #[test]
    fn deterministic_in_seed() {
        let a = grad_check(Activation::Gelu, 5, 1e-4).unwrap();
        assert_eq!(a, grad_check(Activation::Gelu, 5, 1e-4).unwrap());
        assert!(grad_check(Activation::Gelu, 5, 0.0).is_err());
    }
}
