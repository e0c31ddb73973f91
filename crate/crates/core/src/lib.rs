//! Hybrid deep neural networks for mixed numeric and sequential inputs.
//!
//! A [`HybridModel`] runs one feature-learning branch per input type (a
//! fully-connected network over tabular attributes, a 1-D CNN over log
//! curves), concatenates the learned features, and maps them to a target
//! with a shared head. Everything is implemented on a small dense
//! [`Tensor`] type with explicit forward and backward passes.
//!
//! ```
//! use hdnn::network::{FeatureSpec, HybridModel, ModelConfig, Preset, Task};
//! use hdnn::rng::RngStream;
//!
//! let config = ModelConfig::preset(Preset::Hdnn, FeatureSpec::default(), Task::Regression, 42)?;
//! let model = HybridModel::build(config)?;
//!
//! let mut rng = RngStream::new(0);
//! let numeric = rng.normal_tensor(vec![3, 4], 0.0, 1.0)?;
//! let curves = rng.normal_tensor(vec![3, 7, 64], 0.0, 1.0)?;
//! let y = model.predict(&[numeric, curves])?;
//! assert_eq!(y.shape(), &[3, 1]);
//! # Ok::<(), hdnn::Error>(())
//! ```

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod metrics;
pub mod network;
pub mod optim;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use metrics::Metrics;
pub use network::{HybridModel, ModelConfig};
pub use tensor::Tensor;
