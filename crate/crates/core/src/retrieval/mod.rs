//! Search spaces over projected embeddings, exact cosine nearest-neighbour
//! search, top-N fusion, and the LDA alignment used when no linker is trained.

mod fusion;
mod index;
mod lda;

pub use fusion::{fuse, retrieve, Direction, FusionWeighting, RetrievalMode, DEFAULT_FUSE_N};
pub use index::{
    build_index, nearest_k, write_ranked_lists, Candidate, RankedList, SearchIndex,
};
pub use lda::{lda_apply, lda_fit, LdaProjection, DEFAULT_SHRINKAGE};
