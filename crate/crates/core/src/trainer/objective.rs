use std::collections::BTreeMap;

use super::{LossMode, PairedBatch};
use crate::error::{Error, Result};
use crate::linker::{backward, forward, LinkerConfig, LinkerParams, OutputGrads};
use crate::losses::{
    aam_softmax, cts_pair, cts_total, info_nce_directional, regularized_total, sup_cts_total,
    SimilarityMatrix,
};
use crate::numerics::Matrix;

/// Losses the gradient check covers; the last three are the training modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Criterion {
    /// Speaker-to-text InfoNCE at the projection level.
    InfoNce,
    /// Symmetric InfoNCE at the projection level.
    CtsPair,
    Mode(LossMode),
}

impl Criterion {
    pub(crate) const ALL: [Criterion; 5] = [
        Criterion::InfoNce,
        Criterion::CtsPair,
        Criterion::Mode(LossMode::Cts),
        Criterion::Mode(LossMode::CtsSpk),
        Criterion::Mode(LossMode::CtsSupcon),
    ];

    pub(crate) fn name(self) -> &'static str {
        match self {
            Criterion::InfoNce => "info_nce",
            Criterion::CtsPair => "cts_pair",
            Criterion::Mode(m) => m.as_str(),
        }
    }
}

/// Batch loss with its named parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub loss: f64,
    pub components: BTreeMap<String, f64>,
}

/// Loss and parameter gradients of `mode` on one batch.
pub fn objective(
    params: &LinkerParams,
    config: &LinkerConfig,
    mode: LossMode,
    lambda: f64,
    batch: &PairedBatch,
) -> Result<(Objective, LinkerParams)> {
    evaluate(params, config, Criterion::Mode(mode), lambda, batch)
}

fn pull_back(g: &Matrix, a: &Matrix, b: &Matrix) -> (Matrix, Matrix) {
    (g.matmul(b), g.t_matmul(a))
}

pub(crate) fn evaluate(
    params: &LinkerParams,
    config: &LinkerConfig,
    criterion: Criterion,
    lambda: f64,
    batch: &PairedBatch,
) -> Result<(Objective, LinkerParams)> {
    let out = forward(params, config, &batch.speaker_rows, &batch.text_rows)?;
    let tau = params.temperature();
    let s_p = SimilarityMatrix::from_embeddings(&out.x_s_p, &out.x_t_p, tau)?;
    let s_t = SimilarityMatrix::from_embeddings(&out.x_s_t, &out.x_t_t, tau)?;

    let mut components = BTreeMap::new();
    let mut aam = None;
    let (loss, g_p, g_t) = match criterion {
        Criterion::InfoNce => {
            let r = info_nce_directional(&s_p);
            (r.loss, r.grad, None)
        }
        Criterion::CtsPair => {
            let r = cts_pair(&s_p);
            (r.loss, r.grad, None)
        }
        Criterion::Mode(mode) => {
            let total = match mode {
                LossMode::CtsSupcon => sup_cts_total(&s_p, &s_t, &batch.labels)?,
                _ => cts_total(&s_p, &s_t)?,
            };
            components.insert("cts_projection".to_string(), total.projection.loss);
            components.insert("cts_transform".to_string(), total.transform.loss);
            let mut loss = total.loss;
            if mode == LossMode::CtsSpk {
                let weights = params.aam_weights.as_ref().ok_or_else(|| {
                    Error::Config("cts_spk needs n_speakers_train > 0".into())
                })?;
                let r = aam_softmax(
                    &out.x_s_t,
                    &batch.labels,
                    weights,
                    config.aam_margin,
                    config.aam_scale,
                )?;
                components.insert("aam".to_string(), r.loss);
                loss = regularized_total(total.loss, r.loss, lambda)?;
                aam = Some(r);
            }
            (loss, total.projection.grad, Some(total.transform.grad))
        }
    };

    let mut grads = OutputGrads::zeros_like(&out);
    (grads.x_s_p, grads.x_t_p) = pull_back(&g_p, &out.x_s_p, &out.x_t_p);
    let mut dlog_tau = s_p.log_temperature_grad(&g_p);
    if let Some(g_t) = &g_t {
        (grads.x_s_t, grads.x_t_t) = pull_back(g_t, &out.x_s_t, &out.x_t_t);
        dlog_tau += s_t.log_temperature_grad(g_t);
    }
    if let Some(r) = &aam {
        let mut g = r.grad_embeddings.clone();
        g.scale(lambda);
        grads.x_s_t.add_assign(&g);
    }

    let mut param_grads = backward(params, config, &out, &grads);
    if config.learnable_temperature {
        param_grads.log_temperature = dlog_tau;
    }
    if let (Some(r), Some(w)) = (&aam, param_grads.aam_weights.as_mut()) {
        let mut g = r.grad_weights.clone();
        g.scale(lambda);
        *w = g;
    }
    Ok((Objective { loss, components }, param_grads))
}
