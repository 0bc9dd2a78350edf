//! Contrastive linking of speaker embeddings and speaker descriptions.
//!
//! The crate trains small projection/transform heads that map pre-computed
//! speaker embeddings and text-description embeddings into a shared space,
//! then runs exact cosine retrieval in both directions (speaker to text and
//! text to speaker), optionally fusing each query with its top-N neighbours
//! from the other modality.
//!
//! Module map:
//! - [`embedding_io`]: EMB1 files, JSONL manifests, pairing checks, synthetic data
//! - [`numerics`]: dense matrices, Cholesky, Jacobi eigensolver, seeded RNG
//! - [`linker`]: the linking heads, forward/backward and checkpoints
//! - [`losses`]: InfoNCE, symmetric pair loss, supervised contrastive, AAM-softmax
//! - [`trainer`]: minibatching, Adam, the training loop and gradient checks
//! - [`retrieval`]: search indexes, top-k, fusion, the LDA-aligned baseline
//! - [`metrics`]: AP@K, mAP, mean rank, EER and full evaluation reports

pub mod embedding_io;
pub mod error;
pub mod linker;
pub mod losses;
pub mod metrics;
pub mod numerics;
pub mod retrieval;
pub mod trainer;

pub use error::{Error, Result};
