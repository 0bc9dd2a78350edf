//! On-disk embedding format, manifests, pairing checks and synthetic data.

mod emb1;
mod manifest;
mod synth;

pub use emb1::{read_embeddings, write_embeddings, EmbeddingSet, HEADER_LEN, MAGIC, VERSION};
pub use manifest::{
    validate_pairing, Dataset, LabeledSet, Manifest, ManifestEntry, Modality, PairingReport,
    SPEAKER_EMB, SPEAKER_MANIFEST, TEXT_EMB, TEXT_MANIFEST,
};
pub use synth::{gen_synthetic, speaker_label, SynthSpec, SyntheticData};
