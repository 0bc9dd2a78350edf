use serde::{Deserialize, Serialize};

use super::index::top_k_positions;
use super::{nearest_k, RankedList, SearchIndex};
use crate::error::{Error, Result};
use crate::numerics::l2_normalize;

pub const DEFAULT_FUSE_N: usize = 10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionWeighting {
    /// Arithmetic mean of the neighbours.
    #[default]
    Uniform,
    /// Neighbours weighted by their clipped, normalised scores.
    Similarity,
}

impl std::str::FromStr for FusionWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "similarity" => Ok(Self::Similarity),
            other => Err(Error::Config(format!("unknown fusion weighting `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Speaker utterance queries against the prompt index.
    S2t,
    /// Prompt queries against the utterance index.
    T2s,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::S2t => "s2t",
            Direction::T2s => "t2s",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum RetrievalMode {
    Plain,
    Fused { n: usize, weighting: FusionWeighting },
}

/// Unit vector averaged from the `n` rows of `index` nearest to `query`.
///
/// `n` is clamped to the index size.
pub fn fuse(
    index: &SearchIndex,
    query: &[f64],
    n: usize,
    weighting: FusionWeighting,
) -> Result<Vec<f64>> {
    if index.is_empty() {
        return Err(Error::EmptyIndex);
    }
    if n == 0 {
        return Err(Error::Config("fusion n must be at least 1".into()));
    }
    let top = top_k_positions(index, query, n.min(index.len()))?;
    let uniform = vec![1.0 / top.len() as f64; top.len()];
    let weights = match weighting {
        FusionWeighting::Uniform => uniform,
        FusionWeighting::Similarity => {
            let clipped: Vec<f64> = top.iter().map(|&(_, s)| s.max(0.0)).collect();
            let total: f64 = clipped.iter().sum();
            if total > 0.0 {
                clipped.iter().map(|w| w / total).collect()
            } else {
                uniform
            }
        }
    };
    let mut fused = vec![0.0; index.dim()];
    for (&(i, _), w) in top.iter().zip(&weights) {
        for (f, x) in fused.iter_mut().zip(index.row(i)) {
            *f += w * x;
        }
    }
    l2_normalize(&fused)
}

/// Full ranking of `target` for one query embedding.
///
/// In fused mode the query is first replaced by the fusion of its nearest
/// rows in `target` itself.
pub fn retrieve(
    target: &SearchIndex,
    query_id: &str,
    query: &[f64],
    mode: RetrievalMode,
) -> Result<RankedList> {
    let k = target.len();
    match mode {
        RetrievalMode::Plain => nearest_k(target, query_id, query, k),
        RetrievalMode::Fused { n, weighting } => {
            let fused = fuse(target, query, n, weighting)?;
            nearest_k(target, query_id, &fused, k)
        }
    }
}
