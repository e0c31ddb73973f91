//! The hybrid model: feature-learning branches, feature-wise concatenation,
//! and a target-learning head.

mod checkpoint;
mod config;
mod model;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, fnv1a64, load_checkpoint, save_checkpoint,
    FORMAT_VERSION, MAGIC,
};
pub use config::{
    infer_shape, stock_head, stock_numeric_branch, stock_sequence_branch, BranchKind, BranchSpec,
    CategoricalFeature, FeatureSpec, HeadSpec, LayerSpec, ModelConfig, Preset, Task,
    DEFAULT_RESAMPLE_LENGTH, STOCK_DROPOUT,
};
pub use model::{build_model, Branch, ForwardCache, Gradients, HybridModel};
