use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which rank a query contributes to MeanR.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanRankMode {
    /// Rank of the first relevant item.
    #[default]
    First,
    /// Mean rank over all relevant items.
    All,
}

/// AP@K of a full database ranking, or `None` when nothing is relevant.
pub fn average_precision_at_k<T: PartialEq>(ranked: &[T], query: &T, k: usize) -> Option<f64> {
    let total = ranked.iter().filter(|l| *l == query).count();
    if total == 0 || k == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (r, label) in ranked.iter().take(k).enumerate() {
        if label == query {
            hits += 1;
            sum += hits as f64 / (r + 1) as f64;
        }
    }
    Some(sum / total.min(k) as f64)
}

/// 1-based rank of the first relevant item.
pub fn first_relevant_rank<T: PartialEq>(ranked: &[T], query: &T) -> Option<usize> {
    ranked.iter().position(|l| l == query).map(|p| p + 1)
}

/// Mean 1-based rank of all relevant items.
pub fn mean_relevant_rank<T: PartialEq>(ranked: &[T], query: &T) -> Option<f64> {
    let ranks: Vec<usize> = ranked
        .iter()
        .enumerate()
        .filter(|(_, l)| *l == query)
        .map(|(r, _)| r + 1)
        .collect();
    (!ranks.is_empty()).then(|| ranks.iter().sum::<usize>() as f64 / ranks.len() as f64)
}

/// `100 ×` the mean of per-query AP values.
pub fn map_at_k(aps: &[f64]) -> Result<f64> {
    if aps.is_empty() {
        return Err(Error::NoQueries);
    }
    Ok(100.0 * aps.iter().sum::<f64>() / aps.len() as f64)
}

pub fn mean_rank(ranks: &[f64]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::NoQueries);
    }
    Ok(ranks.iter().sum::<f64>() / ranks.len() as f64)
}
