//! Minibatch training of the linker.
//!
//! One step: forward both branches on a paired batch, evaluate the selected
//! objective, backpropagate, take an Adam step, then re-impose the parameter
//! constraints (unit AAM rows, clamped temperature). Batches are reshuffled
//! every epoch from a stream derived from the run seed, so a run is a pure
//! function of its configuration and data.

mod adam;
mod batches;
mod gradcheck;
mod objective;
mod run;

pub use adam::Adam;
pub use batches::{make_batches, PairedBatch, TrainingData};
pub use gradcheck::{grad_check, GradCheckEntry, GradCheckReport, GRAD_CHECK_TOLERANCE};
pub use objective::{objective, Objective};
pub use run::{train, EpochLog, TrainOutcome, TrainState, FINAL_CHECKPOINT, LOSS_LOG};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Symmetric InfoNCE at the projection and transform levels.
    Cts,
    /// `Cts` plus `λ·` AAM-softmax on the speaker transform outputs.
    CtsSpk,
    /// Supervised contrastive counterpart of `Cts`.
    CtsSupcon,
}

impl LossMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LossMode::Cts => "cts",
            LossMode::CtsSpk => "cts_spk",
            LossMode::CtsSupcon => "cts_supcon",
        }
    }
}

impl std::str::FromStr for LossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cts" => Ok(LossMode::Cts),
            "cts_spk" => Ok(LossMode::CtsSpk),
            "cts_supcon" => Ok(LossMode::CtsSupcon),
            other => Err(Error::Config(format!("unknown loss mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub loss_mode: LossMode,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss_mode: LossMode::Cts,
            batch_size: 64,
            epochs: 50,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            lambda: 0.1,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be >= 0");
        }
        Ok(())
    }
}
