//! Retrieval and verification metrics.
//!
//! AP@K divides by `min(R, K)` where `R` counts relevant items in the whole
//! database; relevance means the same speaker label. Queries whose database
//! holds no relevant item are excluded and counted, not scored as zero.

mod eer;
mod evaluate;
mod ranking;

pub use eer::{eer_from_trials, text_eer, EerReport};
pub use evaluate::{
    evaluate, evaluate_indexes, evaluate_unlinked, ConditionReport, EvalOptions, QueryResult,
    RetrievalReport, UnlinkedOptions,
};
pub use ranking::{
    average_precision_at_k, first_relevant_rank, map_at_k, mean_rank, mean_relevant_rank,
    MeanRankMode,
};
