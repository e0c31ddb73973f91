//! Well data ingestion and the preprocessing chain that turns formations
//! into model inputs.
//!
//! The flow is [`load_dataset`] → [`build_dataset`] → [`split_dataset`] →
//! [`Normalizer::fit`] / [`Normalizer::apply`]. [`synth_generate`] writes a
//! synthetic well block in the same on-disk layout.

mod dataset;
mod depth;
mod features;
mod normalizer;
mod raw;
mod synth;

pub use dataset::{build_dataset, split_dataset, InstanceKey, MixedDataset};
pub use depth::Depth;
pub use features::{
    curve_averages, extract_formation_curves, one_hot_encode, resample_segment, Segment,
};
pub use normalizer::{Normalizer, STD_FLOOR};
pub use raw::{
    load_dataset, write_attributes, write_curves, AttributeRow, RawWellData, WellCurves,
    ATTRIBUTES_FILE, CURVES_FILE,
};
pub use synth::{synth_generate, synth_wells, SynthConfig};

/// Number of log-curve channels per depth sample.
pub const CURVE_CHANNELS: usize = 7;

/// Curve channel names in file and tensor order.
pub const CURVE_NAMES: [&str; CURVE_CHANNELS] = ["CAL", "AC", "GR", "LLD", "LLS", "SP", "VSH"];

/// Formation thickness, formation median depth, perforation thickness and
/// perforation count.
pub const BASE_NUMERIC_FEATURES: usize = 4;
