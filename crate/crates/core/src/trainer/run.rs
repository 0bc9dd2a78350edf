use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{make_batches, objective, Adam, LossMode, TrainConfig, TrainingData};
use crate::embedding_io::{Dataset, Modality};
use crate::error::{Error, Result};
use crate::linker::{init_params, save_checkpoint, LinkerConfig, LinkerParams};
use crate::numerics::SeededRng;

pub const LOSS_LOG: &str = "loss_log.jsonl";
pub const FINAL_CHECKPOINT: &str = "ckpt_final";

pub fn epoch_checkpoint_name(epoch: usize) -> String {
    format!("ckpt_epoch_{epoch}")
}

/// One line of the loss log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub steps: usize,
    pub temperature: f64,
    /// Batch-mean of each named loss part.
    #[serde(flatten)]
    pub components: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub params: LinkerParams,
    pub adam: Adam,
    pub epochs_done: usize,
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: TrainState,
    pub log: Vec<EpochLog>,
    /// Final checkpoint, when an output directory was given.
    pub checkpoint: Option<PathBuf>,
}

fn check_dims(linker: &LinkerConfig, data: &Dataset) -> Result<()> {
    for (modality, set) in [(Modality::Speaker, &data.speaker), (Modality::Text, &data.text)] {
        if set.dim() != linker.input_dim(modality) {
            return Err(Error::DimMismatch {
                context: "training embeddings",
                expected: linker.input_dim(modality),
                found: set.dim(),
            });
        }
    }
    Ok(())
}

struct Output<'a> {
    dir: &'a Path,
    log: BufWriter<File>,
}

impl<'a> Output<'a> {
    fn create(dir: &'a Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOSS_LOG);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            dir,
            log: BufWriter::new(file),
        })
    }

    fn append(&mut self, entry: &EpochLog) -> Result<()> {
        let path = self.dir.join(LOSS_LOG);
        serde_json::to_writer(&mut self.log, entry)?;
        writeln!(self.log).map_err(|e| Error::io(&path, e))?;
        self.log.flush().map_err(|e| Error::io(&path, e))
    }
}

/// Trains a freshly initialised linker on `data`.
///
/// With `out_dir`, writes `ckpt_epoch_{k}` after every epoch, the final
/// parameters to `ckpt_final`, and one loss-log line per epoch.
pub fn train(
    linker: &LinkerConfig,
    config: &TrainConfig,
    data: &Dataset,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    linker.validate()?;
    config.validate()?;
    check_dims(linker, data)?;
    let training = TrainingData::new(data)?;
    if config.loss_mode == LossMode::CtsSpk && linker.n_speakers_train != training.n_classes() {
        return Err(Error::Config(format!(
            "cts_spk needs n_speakers_train = {} (training speakers), got {}",
            training.n_classes(),
            linker.n_speakers_train
        )));
    }

    let params = init_params(linker, config.seed)?;
    let adam = Adam::new(&params, config);
    let mut state = TrainState {
        params,
        adam,
        epochs_done: 0,
        epoch_losses: Vec::new(),
    };
    let mut out = out_dir.map(Output::create).transpose()?;
    let mut last_good: Option<PathBuf> = None;
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let mut rng = SeededRng::derive(config.seed, epoch as u64);
        let batches = make_batches(&training, config.batch_size, config.shuffle.then_some(&mut rng))?;
        let mut total = 0.0;
        let mut parts: BTreeMap<String, f64> = BTreeMap::new();
        for batch in &batches {
            let diverged = |last_good: &Option<PathBuf>, step| Error::Diverged {
                epoch,
                step,
                last_good: last_good.clone(),
            };
            let (obj, grads) = match objective(
                &state.params,
                linker,
                config.loss_mode,
                config.lambda,
                batch,
            ) {
                Ok(r) => r,
                Err(Error::NonFiniteSimilarity | Error::NonFinite { .. }) => {
                    return Err(diverged(&last_good, state.adam.step));
                }
                Err(e) => return Err(e),
            };
            if !obj.loss.is_finite() {
                return Err(diverged(&last_good, state.adam.step));
            }
            match state.adam.step(&mut state.params, &grads, config.learning_rate) {
                Ok(()) => {}
                Err(Error::NonFiniteGradient(_)) => {
                    return Err(diverged(&last_good, state.adam.step));
                }
                Err(e) => return Err(e),
            }
            if !state.params.is_finite()
                || !state.adam.m.iter().chain(&state.adam.v).all(|x| x.is_finite())
            {
                return Err(diverged(&last_good, state.adam.step));
            }
            total += obj.loss;
            for (k, v) in obj.components {
                *parts.entry(k).or_default() += v;
            }
        }
        let steps = batches.len();
        let mean = |x: f64| if steps == 0 { 0.0 } else { x / steps as f64 };
        let entry = EpochLog {
            epoch,
            mean_loss: mean(total),
            steps,
            temperature: state.params.temperature(),
            components: parts.into_iter().map(|(k, v)| (k, mean(v))).collect(),
        };
        state.epochs_done = epoch;
        state.epoch_losses.push(entry.mean_loss);
        if let Some(out) = out.as_mut() {
            out.append(&entry)?;
            let path = out.dir.join(epoch_checkpoint_name(epoch));
            save_checkpoint(&state.params, linker, &path)?;
            last_good = Some(path);
        }
        log.push(entry);
    }

    let checkpoint = match out {
        Some(out) => {
            let path = out.dir.join(FINAL_CHECKPOINT);
            save_checkpoint(&state.params, linker, &path)?;
            Some(path)
        }
        None => None,
    };
    Ok(TrainOutcome {
        state,
        log,
        checkpoint,
    })
}
