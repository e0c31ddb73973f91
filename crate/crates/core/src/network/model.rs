use super::config::{BranchKind, LayerSpec, ModelConfig};
use crate::data::{MixedDataset, Normalizer};
use crate::error::{Error, Result};
use crate::layers::{
    concat_features, split_features, BatchNorm, InputSegment, Layer, LayerCache, LayerMode,
};
use crate::rng::RngStream;
use crate::tensor::Tensor;

/// Label of the RNG sub-stream used for parameter initialization.
const INIT_STREAM: u64 = 0x1417;

/// One feature-learning branch.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub name: String,
    pub kind: BranchKind,
    pub layers: Vec<Layer>,
}

/// Branches whose flat outputs are concatenated feature-wise and fed to a
/// shared head.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridModel {
    config: ModelConfig,
    branches: Vec<Branch>,
    head: Vec<Layer>,
    normalizer: Option<Normalizer>,
}

/// Everything [`HybridModel::backward`] needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    branches: Vec<Vec<LayerCache>>,
    head: Vec<LayerCache>,
    widths: Vec<usize>,
    output_shape: Vec<usize>,
}

impl ForwardCache {
    /// Smallest distance of any ReLU or max-pool input from a kink.
    pub fn kink_margin(&self) -> f64 {
        self.branches
            .iter()
            .flatten()
            .chain(&self.head)
            .map(LayerCache::kink_margin)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Parameter gradients keyed by parameter name, in [`HybridModel::parameters`]
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    entries: Vec<(String, Tensor)>,
}

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.entries.iter().map(|(_, t)| t).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn build_layers(specs: &[LayerSpec], input: &[usize], rng: &mut RngStream) -> Result<Vec<Layer>> {
    let mut shape = input.to_vec();
    let mut layers = Vec::with_capacity(specs.len());
    for spec in specs {
        let layer = match *spec {
            LayerSpec::Dense { units } => {
                let fan_in = shape[0];
                let weight =
                    rng.normal_tensor(vec![fan_in, units], 0.0, (2.0 / fan_in as f64).sqrt())?;
                Layer::dense(weight, Tensor::zeros(vec![units])?)
            }
            LayerSpec::Conv1d {
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let fan_in = shape[0] * kernel;
                let k = rng.normal_tensor(
                    vec![out_channels, shape[0], kernel],
                    0.0,
                    (2.0 / fan_in as f64).sqrt(),
                )?;
                Layer::conv1d(k, Tensor::zeros(vec![out_channels])?, stride, padding)
            }
            LayerSpec::BatchNorm => Layer::BatchNorm(BatchNorm::new(shape[0])?),
            LayerSpec::Relu => Layer::Relu,
            LayerSpec::Dropout { rate } => Layer::Dropout { rate },
            LayerSpec::MaxPool1d { window, stride } => Layer::MaxPool1d { window, stride },
            LayerSpec::GlobalAvgPool => Layer::GlobalAvgPool,
        };
        shape = spec.output_shape(&shape)?;
        layers.push(layer);
    }
    Ok(layers)
}

fn run_layers(
    layers: &[Layer],
    input: &Tensor,
    mode: LayerMode,
    rng: &mut RngStream,
) -> Result<(Tensor, Vec<LayerCache>)> {
    let mut caches = Vec::with_capacity(layers.len());
    let mut x = input.clone();
    for layer in layers {
        let (y, cache) = layer.forward(&x, mode, rng)?;
        caches.push(cache);
        x = y;
    }
    Ok((x, caches))
}

/// Backpropagates through `layers`, returning the input gradient and the
/// per-layer parameter gradients in forward order.
fn unwind(
    layers: &[Layer],
    caches: Vec<LayerCache>,
    dy: Tensor,
) -> Result<(Tensor, Vec<Vec<(&'static str, Tensor)>>)> {
    let mut grads = vec![Vec::new(); layers.len()];
    let mut g = dy;
    for (i, cache) in caches.into_iter().enumerate().rev() {
        let (dx, p) = layers[i].backward(cache, &g)?;
        grads[i] = p;
        g = dx;
    }
    Ok((g, grads))
}

impl HybridModel {
    /// Validates `config` and initializes every parameter from `config.seed`.
    ///
    /// Weights are He-normal (`σ = √(2/fan_in)`), biases and β are zero,
    /// γ is one. Parameters are drawn in [`HybridModel::parameters`] order.
    pub fn build(config: ModelConfig) -> Result<Self> {
        let widths = config.validate()?;
        let mut rng = RngStream::new(config.seed).fork(INIT_STREAM);
        let branches = config
            .branches
            .iter()
            .map(|b| {
                Ok(Branch {
                    name: b.name.clone(),
                    kind: b.kind,
                    layers: build_layers(&b.layers, &b.input, &mut rng)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut head = build_layers(&config.head.layers, &[config.head.input_width], &mut rng)?;

        // Branch blocks of the head's first product are summed in name order,
        // independent of their position in the concatenation.
        if let Some(Layer::Dense(first)) = head.first_mut() {
            let mut names: Vec<&str> = config.branches.iter().map(|b| b.name.as_str()).collect();
            names.sort_unstable();
            let mut offset = 0;
            let segments = config
                .branches
                .iter()
                .zip(&widths)
                .map(|(b, &width)| {
                    let seg = InputSegment {
                        offset,
                        width,
                        rank: names
                            .iter()
                            .position(|n| *n == b.name)
                            .expect("name listed"),
                    };
                    offset += width;
                    seg
                })
                .collect();
            first.segments = Some(segments);
        }
        Ok(Self {
            config,
            branches,
            head,
            normalizer: None,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn head(&self) -> &[Layer] {
        &self.head
    }

    pub fn normalizer(&self) -> Option<&Normalizer> {
        self.normalizer.as_ref()
    }

    pub fn set_normalizer(&mut self, normalizer: Option<Normalizer>) {
        self.normalizer = normalizer;
    }

    /// Runs every branch on its input, concatenates the branch features and
    /// applies the head. `inputs` holds one `[B × input…]` tensor per branch,
    /// in config order.
    pub fn forward(
        &self,
        inputs: &[Tensor],
        mode: LayerMode,
        rng: &mut RngStream,
    ) -> Result<(Tensor, ForwardCache)> {
        self.check_inputs(inputs)?;
        let mut features = Vec::with_capacity(self.branches.len());
        let mut branch_caches = Vec::with_capacity(self.branches.len());
        for (branch, x) in self.branches.iter().zip(inputs) {
            let (t, caches) = run_layers(&branch.layers, x, mode, rng)?;
            features.push(t);
            branch_caches.push(caches);
        }
        let widths = features.iter().map(|t| t.shape()[1]).collect();
        let z = concat_features(&features.iter().collect::<Vec<_>>())?;
        let (y, head_caches) = run_layers(&self.head, &z, mode, rng)?;
        let cache = ForwardCache {
            branches: branch_caches,
            head: head_caches,
            widths,
            output_shape: y.shape().to_vec(),
        };
        Ok((y, cache))
    }

    /// Train-mode forward that also folds batch statistics into the
    /// batch-norm running estimates.
    pub fn forward_train(
        &mut self,
        inputs: &[Tensor],
        rng: &mut RngStream,
    ) -> Result<(Tensor, ForwardCache)> {
        let (y, cache) = self.forward(inputs, LayerMode::Train, rng)?;
        for (branch, caches) in self.branches.iter_mut().zip(&cache.branches) {
            for (layer, c) in branch.layers.iter_mut().zip(caches) {
                layer.commit(c);
            }
        }
        for (layer, c) in self.head.iter_mut().zip(&cache.head) {
            layer.commit(c);
        }
        Ok((y, cache))
    }

    /// Infer-mode forward. Deterministic and free of side effects.
    pub fn predict(&self, inputs: &[Tensor]) -> Result<Tensor> {
        Ok(self
            .forward(inputs, LayerMode::Infer, &mut RngStream::new(0))?
            .0)
    }

    /// Gradients of every trainable parameter given `dL/dY`.
    pub fn backward(&self, cache: ForwardCache, d_pred: &Tensor) -> Result<Gradients> {
        Ok(self.backward_with_input_grads(cache, d_pred)?.0)
    }

    /// [`HybridModel::backward`] plus the gradient with respect to each
    /// branch input.
    pub fn backward_with_input_grads(
        &self,
        cache: ForwardCache,
        d_pred: &Tensor,
    ) -> Result<(Gradients, Vec<Tensor>)> {
        if d_pred.shape() != cache.output_shape.as_slice() {
            return Err(Error::Shape(format!(
                "upstream gradient {:?} for predictions {:?}",
                d_pred.shape(),
                cache.output_shape
            )));
        }
        let (dz, head_grads) = unwind(&self.head, cache.head, d_pred.clone())?;
        let parts = split_features(&dz, &cache.widths)?;
        let mut branch_grads = Vec::with_capacity(self.branches.len());
        let mut input_grads = Vec::with_capacity(self.branches.len());
        for ((branch, caches), dt) in self.branches.iter().zip(cache.branches).zip(parts) {
            let (dx, grads) = unwind(&branch.layers, caches, dt)?;
            input_grads.push(dx);
            branch_grads.push(grads);
        }
        let mut entries = Vec::new();
        let sections = self
            .branches
            .iter()
            .map(|b| b.name.as_str())
            .zip(branch_grads)
            .chain(std::iter::once(("head", head_grads)));
        for (prefix, layers) in sections {
            for (i, grads) in layers.into_iter().enumerate() {
                entries.extend(
                    grads
                        .into_iter()
                        .map(|(p, g)| (format!("{prefix}.{i}.{p}"), g)),
                );
            }
        }
        Ok((Gradients { entries }, input_grads))
    }

    fn check_inputs(&self, inputs: &[Tensor]) -> Result<()> {
        if inputs.len() != self.branches.len() {
            return Err(Error::InvalidArgument(format!(
                "model has {} branches but {} inputs were given",
                self.branches.len(),
                inputs.len()
            )));
        }
        let batch = inputs.first().map(|t| t.shape()[0]);
        for (spec, x) in self.config.branches.iter().zip(inputs) {
            if x.shape()[1..] != spec.input[..] || Some(x.shape()[0]) != batch {
                return Err(Error::Shape(format!(
                    "branch `{}` expects [B × {:?}] with a shared B, got {:?}",
                    spec.name,
                    spec.input,
                    x.shape()
                )));
            }
        }
        Ok(())
    }

    /// Branch inputs for the given dataset instances, in branch order.
    pub fn inputs_for(&self, dataset: &MixedDataset, indices: &[usize]) -> Result<Vec<Tensor>> {
        self.config
            .branches
            .iter()
            .map(|b| {
                let t = match b.kind {
                    BranchKind::NumericMlp => dataset.numeric_batch(indices)?,
                    BranchKind::SequenceCnn => dataset.curve_batch(indices)?,
                };
                if t.shape()[1..] != b.input[..] {
                    return Err(Error::Data(format!(
                        "branch `{}` expects per-instance input {:?}, the dataset provides {:?}",
                        b.name,
                        b.input,
                        &t.shape()[1..]
                    )));
                }
                Ok(t)
            })
            .collect()
    }

    fn sections(&self) -> impl Iterator<Item = (&str, &[Layer])> {
        self.branches
            .iter()
            .map(|b| (b.name.as_str(), b.layers.as_slice()))
            .chain(std::iter::once(("head", self.head.as_slice())))
    }

    fn sections_mut(&mut self) -> impl Iterator<Item = (&str, &mut [Layer])> {
        self.branches
            .iter_mut()
            .map(|b| (b.name.as_str(), b.layers.as_mut_slice()))
            .chain(std::iter::once(("head", self.head.as_mut_slice())))
    }

    /// Trainable tensors named `<branch>.<layer index>.<param>` (the head
    /// uses `head`), branches in config order, then the head.
    pub fn parameters(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (prefix, layers) in self.sections() {
            for (i, layer) in layers.iter().enumerate() {
                out.extend(
                    layer
                        .params()
                        .into_iter()
                        .map(|(p, t)| (format!("{prefix}.{i}.{p}"), t)),
                );
            }
        }
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        for (prefix, layers) in self.sections_mut() {
            for (i, layer) in layers.iter_mut().enumerate() {
                out.extend(
                    layer
                        .params_mut()
                        .into_iter()
                        .map(|(p, t)| (format!("{prefix}.{i}.{p}"), t)),
                );
            }
        }
        out
    }

    /// Batch-norm running statistics, named like parameters.
    pub fn buffers(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (prefix, layers) in self.sections() {
            for (i, layer) in layers.iter().enumerate() {
                out.extend(
                    layer
                        .buffers()
                        .into_iter()
                        .map(|(p, t)| (format!("{prefix}.{i}.{p}"), t)),
                );
            }
        }
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        for (prefix, layers) in self.sections_mut() {
            for (i, layer) in layers.iter_mut().enumerate() {
                out.extend(
                    layer
                        .buffers_mut()
                        .into_iter()
                        .map(|(p, t)| (format!("{prefix}.{i}.{p}"), t)),
                );
            }
        }
        out
    }

    pub fn parameter_shapes(&self) -> Vec<Vec<usize>> {
        self.parameters()
            .iter()
            .map(|(_, t)| t.shape().to_vec())
            .collect()
    }

    /// Total trainable scalars, batch-norm γ and β included.
    pub fn count_parameters(&self) -> usize {
        self.parameters().iter().map(|(_, t)| t.len()).sum()
    }
}

/// Shorthand for [`HybridModel::build`].
pub fn build_model(config: ModelConfig) -> Result<HybridModel> {
    HybridModel::build(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{FeatureSpec, Preset, Task};

    fn stock(preset: Preset) -> HybridModel {
        let config =
            ModelConfig::preset(preset, FeatureSpec::default(), Task::Regression, 11).unwrap();
        HybridModel::build(config).unwrap()
    }

    fn inputs(model: &HybridModel, batch: usize, seed: u64) -> Vec<Tensor> {
        let mut rng = RngStream::new(seed);
        model
            .config()
            .branches
            .iter()
            .map(|b| {
                let shape: Vec<usize> = std::iter::once(batch)
                    .chain(b.input.iter().copied())
                    .collect();
                rng.normal_tensor(shape, 0.0, 1.0).unwrap()
            })
            .collect()
    }

    #[test]
    fn stock_parameter_counts() {
        // numeric: 4·32+32 + 32·32+32; sequence: convs + BN γ/β; head: 96·64+64 + 64+1
        let numeric = 4 * 32 + 32 + 32 * 32 + 32;
        let sequence = (16 * 7 * 5 + 16 + 32) + (32 * 16 * 5 + 32 + 64) + (64 * 32 * 3 + 64 + 128);
        let head = 96 * 64 + 64 + 64 + 1;
        assert_eq!(
            stock(Preset::Hdnn).count_parameters(),
            numeric + sequence + head
        );
    }

    #[test]
    fn same_seed_same_parameters() {
        assert_eq!(stock(Preset::Hdnn), stock(Preset::Hdnn));
    }

    #[test]
    fn batch_consistency() {
        let model = stock(Preset::Hdnn);
        let x = inputs(&model, 8, 3);
        let all = model.predict(&x).unwrap();
        let single: Vec<Tensor> = x.iter().map(|t| t.select_rows(&[5]).unwrap()).collect();
        let one = model.predict(&single).unwrap();
        assert!((all.data()[5] - one.data()[0]).abs() < 1e-10);
    }

    #[test]
    fn missing_or_misshaped_inputs() {
        let model = stock(Preset::Hdnn);
        let x = inputs(&model, 2, 3);
        assert!(model.predict(&x[..1]).is_err());
        let swapped = vec![x[1].clone(), x[0].clone()];
        assert!(model.predict(&swapped).is_err());
    }

    #[test]
    fn gradient_names_follow_parameters() {
        let model = stock(Preset::Hdnn);
        let x = inputs(&model, 4, 1);
        let (y, cache) = model
            .forward(&x, LayerMode::Train, &mut RngStream::new(2))
            .unwrap();
        let grads = model
            .backward(cache, &Tensor::full(y.shape().to_vec(), 1.0).unwrap())
            .unwrap();
        let names: Vec<String> = model.parameters().into_iter().map(|(n, _)| n).collect();
        let grad_names: Vec<&str> = grads.iter().map(|(n, _)| n).collect();
        assert_eq!(names, grad_names);
        assert!(names.contains(&"sequence.1.gamma".to_string()));
        assert!(names.contains(&"head.3.bias".to_string()));
    }

    #[test]
    fn forward_train_updates_running_stats() {
        let mut model = stock(Preset::Cnn);
        let before = model
            .buffers()
            .into_iter()
            .map(|(_, t)| t.clone())
            .collect::<Vec<_>>();
        let x = inputs(&model, 4, 1);
        model.forward_train(&x, &mut RngStream::new(0)).unwrap();
        let after = model
            .buffers()
            .into_iter()
            .map(|(_, t)| t.clone())
            .collect::<Vec<_>>();
        assert_ne!(before, after);
    }
}
