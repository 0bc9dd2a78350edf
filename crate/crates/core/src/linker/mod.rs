//! Trainable linking heads: a projection layer per modality into a common
//! width, followed by a per-modality stack of fully-connected transform
//! layers. Both the projection and transform outputs are length-normalised.

mod checkpoint;
mod model;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION,
};
pub use model::{
    backward, branch_forward, forward, glorot_limit, init_params, project, Activation, Branch,
    BranchCache, BranchOutput, Dense, ForwardOutput, LinkerConfig, LinkerParams, OutputGrads,
    TEMPERATURE_RANGE,
};
