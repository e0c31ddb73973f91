//! Differentiable layers with explicit forward and backward passes.
//!
//! Each primitive is available as a pair of free functions (for example
//! [`conv1d`] / [`conv1d_backward`]) and, bundled with its parameters, as a
//! [`Layer`]. A forward pass returns a [`LayerCache`] that the matching
//! backward pass consumes by value, so a cache can be used at most once.

mod activation;
mod batch_norm;
mod concat;
mod conv;
mod dense;
mod dropout;
mod pool;

pub use activation::{relu, relu_backward};
pub use batch_norm::{
    batch_norm_backward, batch_norm_infer, batch_norm_train, update_running_stats, BatchNormCache,
    DEFAULT_EPSILON, DEFAULT_MOMENTUM,
};
pub use concat::{concat_features, split_features};
pub use conv::{conv1d, conv1d_backward, output_length};
pub use dense::{
    fully_connected, fully_connected_backward, fully_connected_segmented, InputSegment,
};
pub use dropout::{dropout, dropout_backward};
pub use pool::{global_avg_pool, global_avg_pool_backward, max_pool1d, max_pool1d_backward};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::Tensor;

/// Whether stochastic and batch-statistics layers run in training or
/// inference behaviour. Only [`Layer::Dropout`] and [`Layer::BatchNorm`] care.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerMode {
    Train,
    Infer,
}

/// Named gradients of one layer's trainable parameters, in the same order as
/// [`Layer::params`].
pub type ParamGrads = Vec<(&'static str, Tensor)>;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `[d_in × d_out]`
    pub weight: Tensor,
    pub bias: Tensor,
    pub segments: Option<Vec<InputSegment>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    /// `[C_out × C_in × k]`
    pub kernel: Tensor,
    pub bias: Tensor,
    pub stride: usize,
    pub padding: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Result<Self> {
        Ok(Self {
            gamma: Tensor::full(vec![channels], 1.0)?,
            beta: Tensor::zeros(vec![channels])?,
            running_mean: Tensor::zeros(vec![channels])?,
            running_var: Tensor::full(vec![channels], 1.0)?,
            momentum: DEFAULT_MOMENTUM,
            eps: DEFAULT_EPSILON,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(Dense),
    Conv1d(Conv1d),
    BatchNorm(BatchNorm),
    Relu,
    Dropout { rate: f64 },
    MaxPool1d { window: usize, stride: usize },
    GlobalAvgPool,
}

/// Forward-pass values needed by [`Layer::backward`].
#[derive(Debug, Clone)]
pub enum LayerCache {
    Dense { x: Tensor },
    Conv1d { x: Tensor },
    BatchNorm(BatchNormCache),
    Relu { x: Tensor },
    Dropout { mask: Option<Tensor> },
    MaxPool1d { x: Tensor, source: Vec<usize> },
    GlobalAvgPool { input_shape: Vec<usize> },
}

impl LayerCache {
    /// Distance of the cached forward pass from the nearest point where the
    /// layer is not differentiable: the smallest `|x|` entering a ReLU, or a
    /// lower bound on the winner/runner-up gap of any max-pool window.
    /// Infinite for smooth layers.
    pub fn kink_margin(&self) -> f64 {
        match self {
            LayerCache::Relu { x } => x
                .data()
                .iter()
                .map(|v| v.abs())
                .fold(f64::INFINITY, f64::min),
            LayerCache::MaxPool1d { x, .. } => pool_margin(x),
            _ => f64::INFINITY,
        }
    }
}

// Smallest gap between any two values in a row; a lower bound for every
// window. Pairs of exact zeros are skipped: they come from a ReLU dead zone,
// where nearby inputs stay zero and the pool is locally smooth.
fn pool_margin(x: &Tensor) -> f64 {
    let len = *x.shape().last().unwrap_or(&1);
    let mut margin = f64::INFINITY;
    for row in x.data().chunks(len) {
        for i in 0..row.len() {
            for j in i + 1..row.len() {
                if row[i] != 0.0 || row[j] != 0.0 {
                    margin = margin.min((row[i] - row[j]).abs());
                }
            }
        }
    }
    margin
}

impl Layer {
    pub fn dense(weight: Tensor, bias: Tensor) -> Self {
        Layer::Dense(Dense {
            weight,
            bias,
            segments: None,
        })
    }

    pub fn conv1d(kernel: Tensor, bias: Tensor, stride: usize, padding: usize) -> Self {
        Layer::Conv1d(Conv1d {
            kernel,
            bias,
            stride,
            padding,
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Conv1d(_) => "conv1d",
            Layer::BatchNorm(_) => "batch_norm",
            Layer::Relu => "relu",
            Layer::Dropout { .. } => "dropout",
            Layer::MaxPool1d { .. } => "max_pool1d",
            Layer::GlobalAvgPool => "global_avg_pool",
        }
    }

    /// Runs the layer. `rng` is only drawn from by `Dropout` in `Train` mode.
    pub fn forward(
        &self,
        x: &Tensor,
        mode: LayerMode,
        rng: &mut RngStream,
    ) -> Result<(Tensor, LayerCache)> {
        Ok(match self {
            Layer::Dense(d) => {
                let y = match &d.segments {
                    Some(segs) => fully_connected_segmented(x, &d.weight, &d.bias, segs)?,
                    None => fully_connected(x, &d.weight, &d.bias)?,
                };
                (y, LayerCache::Dense { x: x.clone() })
            }
            Layer::Conv1d(c) => (
                conv1d(x, &c.kernel, &c.bias, c.stride, c.padding)?,
                LayerCache::Conv1d { x: x.clone() },
            ),
            Layer::BatchNorm(bn) => {
                let (y, cache) = match mode {
                    LayerMode::Train => batch_norm_train(x, &bn.gamma, &bn.beta, bn.eps)?,
                    LayerMode::Infer => batch_norm_infer(
                        x,
                        &bn.gamma,
                        &bn.beta,
                        &bn.running_mean,
                        &bn.running_var,
                        bn.eps,
                    )?,
                };
                (y, LayerCache::BatchNorm(cache))
            }
            Layer::Relu => (relu(x), LayerCache::Relu { x: x.clone() }),
            Layer::Dropout { rate } => {
                let (y, mask) = dropout(x, *rate, rng, mode)?;
                (y, LayerCache::Dropout { mask })
            }
            Layer::MaxPool1d { window, stride } => {
                let (y, source) = max_pool1d(x, *window, *stride)?;
                (
                    y,
                    LayerCache::MaxPool1d {
                        x: x.clone(),
                        source,
                    },
                )
            }
            Layer::GlobalAvgPool => (
                global_avg_pool(x)?,
                LayerCache::GlobalAvgPool {
                    input_shape: x.shape().to_vec(),
                },
            ),
        })
    }

    /// Gradient with respect to the layer input plus parameter gradients.
    pub fn backward(&self, cache: LayerCache, dy: &Tensor) -> Result<(Tensor, ParamGrads)> {
        Ok(match (self, cache) {
            (Layer::Dense(d), LayerCache::Dense { x }) => {
                let (dx, dw, db) = fully_connected_backward(&x, &d.weight, dy)?;
                (dx, vec![("weight", dw), ("bias", db)])
            }
            (Layer::Conv1d(c), LayerCache::Conv1d { x }) => {
                let (dx, dk, db) = conv1d_backward(&x, &c.kernel, dy, c.stride, c.padding)?;
                (dx, vec![("kernel", dk), ("bias", db)])
            }
            (Layer::BatchNorm(bn), LayerCache::BatchNorm(cache)) => {
                let (dx, dg, db) = batch_norm_backward(cache, &bn.gamma, dy)?;
                (dx, vec![("gamma", dg), ("beta", db)])
            }
            (Layer::Relu, LayerCache::Relu { x }) => (relu_backward(&x, dy)?, vec![]),
            (Layer::Dropout { .. }, LayerCache::Dropout { mask }) => {
                (dropout_backward(mask.as_ref(), dy)?, vec![])
            }
            (Layer::MaxPool1d { .. }, LayerCache::MaxPool1d { x, source }) => {
                (max_pool1d_backward(x.shape(), &source, dy)?, vec![])
            }
            (Layer::GlobalAvgPool, LayerCache::GlobalAvgPool { input_shape }) => {
                (global_avg_pool_backward(&input_shape, dy)?, vec![])
            }
            (layer, _) => {
                return Err(Error::InvalidArgument(format!(
                    "cache does not belong to a {} layer",
                    layer.kind()
                )))
            }
        })
    }

    /// Folds train-mode batch statistics into the running statistics.
    pub fn commit(&mut self, cache: &LayerCache) {
        if let (Layer::BatchNorm(bn), LayerCache::BatchNorm(c)) = (self, cache) {
            update_running_stats(&mut bn.running_mean, &mut bn.running_var, c, bn.momentum);
        }
    }

    /// Trainable parameters, in a fixed order.
    pub fn params(&self) -> Vec<(&'static str, &Tensor)> {
        match self {
            Layer::Dense(d) => vec![("weight", &d.weight), ("bias", &d.bias)],
            Layer::Conv1d(c) => vec![("kernel", &c.kernel), ("bias", &c.bias)],
            Layer::BatchNorm(bn) => vec![("gamma", &bn.gamma), ("beta", &bn.beta)],
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        match self {
            Layer::Dense(d) => vec![("weight", &mut d.weight), ("bias", &mut d.bias)],
            Layer::Conv1d(c) => vec![("kernel", &mut c.kernel), ("bias", &mut c.bias)],
            Layer::BatchNorm(bn) => vec![("gamma", &mut bn.gamma), ("beta", &mut bn.beta)],
            _ => vec![],
        }
    }

    /// Non-trainable state (batch-norm running statistics).
    pub fn buffers(&self) -> Vec<(&'static str, &Tensor)> {
        match self {
            Layer::BatchNorm(bn) => vec![
                ("running_mean", &bn.running_mean),
                ("running_var", &bn.running_var),
            ],
            _ => vec![],
        }
    }

    pub fn buffers_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        match self {
            Layer::BatchNorm(bn) => vec![
                ("running_mean", &mut bn.running_mean),
                ("running_var", &mut bn.running_var),
            ],
            _ => vec![],
        }
    }
}
