use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::linker::LinkerParams;

/// Adam moments over the flattened parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl Adam {
    pub fn new(params: &LinkerParams, config: &TrainConfig) -> Self {
        let n = params.len();
        Self {
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    /// One bias-corrected update, followed by the parameter constraints.
    pub fn step(&mut self, params: &mut LinkerParams, grads: &LinkerParams, lr: f64) -> Result<()> {
        for (name, g) in grads.tensors() {
            if !g.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFiniteGradient(name));
            }
        }
        if grads.len() != self.m.len() || params.len() != self.m.len() {
            return Err(Error::DimMismatch {
                context: "adam state",
                expected: self.m.len(),
                found: grads.len(),
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let mut offset = 0;
        for ((_, theta), (_, g)) in params.tensors_mut().into_iter().zip(grads.tensors()) {
            let len = g.len();
            let m = &mut self.m[offset..offset + len];
            let v = &mut self.v[offset..offset + len];
            for i in 0..len {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                theta[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
            offset += len;
        }
        params.normalize_aam_rows();
        params.clamp_temperature();
        Ok(())
    }
}
