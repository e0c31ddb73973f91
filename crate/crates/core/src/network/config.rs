//! Declarative description of a hybrid model: feature-learning branches, the
//! target-learning head, and the input features each branch consumes.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{BASE_NUMERIC_FEATURES, CURVE_CHANNELS};
use crate::error::{Error, Result};
use crate::layers::output_length;

/// One layer of a branch or of the head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Dense {
        units: usize,
    },
    Conv1d {
        out_channels: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
    },
    BatchNorm,
    Relu,
    Dropout {
        rate: f64,
    },
    MaxPool1d {
        window: usize,
        stride: usize,
    },
    GlobalAvgPool,
}

fn one() -> usize {
    1
}

impl LayerSpec {
    /// Stride-1 convolution padded so the length is preserved (odd kernels).
    pub fn conv_same(out_channels: usize, kernel: usize) -> Self {
        LayerSpec::Conv1d {
            out_channels,
            kernel,
            stride: 1,
            padding: kernel / 2,
        }
    }

    /// Per-sample output shape for a per-sample input shape (`[d]` or `[C, L]`).
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |why: &str| Error::Config(format!("{self:?} on input {input:?}: {why}"));
        match (self, input) {
            (LayerSpec::Dense { units }, [_]) if *units > 0 => Ok(vec![*units]),
            (LayerSpec::Dense { .. }, [_]) => Err(bad("zero units")),
            (LayerSpec::Dense { .. }, _) => Err(bad("dense layers need flat input; pool first")),
            (
                LayerSpec::Conv1d {
                    out_channels,
                    kernel,
                    stride,
                    padding,
                },
                [_, len],
            ) => {
                if *out_channels == 0 {
                    return Err(bad("zero output channels"));
                }
                let out = output_length(*len, *kernel, *stride, *padding)
                    .map_err(|e| bad(&e.to_string()))?;
                Ok(vec![*out_channels, out])
            }
            (LayerSpec::MaxPool1d { window, stride }, [c, len]) => {
                let out =
                    output_length(*len, *window, *stride, 0).map_err(|e| bad(&e.to_string()))?;
                Ok(vec![*c, out])
            }
            (LayerSpec::GlobalAvgPool, [c, _]) => Ok(vec![*c]),
            (
                LayerSpec::Conv1d { .. } | LayerSpec::MaxPool1d { .. } | LayerSpec::GlobalAvgPool,
                _,
            ) => Err(bad("expects a [channels × length] input")),
            (LayerSpec::Dropout { rate }, _) if !(0.0..1.0).contains(rate) => {
                Err(bad("rate outside [0, 1)"))
            }
            (LayerSpec::BatchNorm | LayerSpec::Relu | LayerSpec::Dropout { .. }, _) => {
                Ok(input.to_vec())
            }
        }
    }
}

/// Walks `layers` from `input`, returning the final per-sample shape.
pub fn infer_shape(input: &[usize], layers: &[LayerSpec]) -> Result<Vec<usize>> {
    layers
        .iter()
        .try_fold(input.to_vec(), |shape, l| l.output_shape(&shape))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    /// Fully-connected network over the numeric feature vector.
    NumericMlp,
    /// 1-D convolutional network over the resampled curve tensor.
    SequenceCnn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    pub name: String,
    pub kind: BranchKind,
    /// Per-sample input shape: `[features]` or `[channels, length]`.
    pub input: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    Regression,
    /// Head emits raw logits; softmax lives in the loss.
    Classification {
        classes: usize,
    },
}

impl Task {
    pub fn output_width(&self) -> usize {
        match self {
            Task::Regression => 1,
            Task::Classification { classes } => *classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadSpec {
    pub task: Task,
    /// Must equal the sum of branch output widths.
    pub input_width: usize,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoricalFeature {
    pub column: String,
    pub vocabulary: Vec<String>,
}

/// How raw well data is turned into branch inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    /// Samples per curve channel after resampling each formation segment.
    pub resample_length: usize,
    /// Append the seven per-channel curve means to the numeric features.
    #[serde(default)]
    pub curve_averages: bool,
    #[serde(default)]
    pub categorical: Vec<CategoricalFeature>,
}

pub const DEFAULT_RESAMPLE_LENGTH: usize = 64;

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            resample_length: DEFAULT_RESAMPLE_LENGTH,
            curve_averages: false,
            categorical: Vec::new(),
        }
    }
}

impl FeatureSpec {
    /// Width of the numeric feature vector: four formation/perforation
    /// attributes, the one-hot blocks, and optionally seven curve means.
    pub fn numeric_width(&self) -> usize {
        BASE_NUMERIC_FEATURES
            + self
                .categorical
                .iter()
                .map(|c| c.vocabulary.len())
                .sum::<usize>()
            + if self.curve_averages {
                CURVE_CHANNELS
            } else {
                0
            }
    }

    pub fn curve_shape(&self) -> [usize; 2] {
        [CURVE_CHANNELS, self.resample_length]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub branches: Vec<BranchSpec>,
    pub head: HeadSpec,
    pub seed: u64,
    pub features: FeatureSpec,
}

const RESERVED_NAMES: [&str; 3] = ["head", "normalizer", "adam"];

impl ModelConfig {
    /// Checks every structural invariant and returns the per-branch output
    /// widths.
    pub fn validate(&self) -> Result<Vec<usize>> {
        if self.branches.is_empty() {
            return Err(Error::Config("at least one branch is required".into()));
        }
        let mut seen = HashSet::new();
        let mut widths = Vec::with_capacity(self.branches.len());
        for b in &self.branches {
            let valid_name = !b.name.is_empty()
                && b.name
                    .chars()
                    .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
            if !valid_name || RESERVED_NAMES.contains(&b.name.as_str()) {
                return Err(Error::Config(format!(
                    "branch name `{}` must be lowercase [a-z0-9_] and not one of {RESERVED_NAMES:?}",
                    b.name
                )));
            }
            if !seen.insert(b.name.as_str()) {
                return Err(Error::Config(format!("duplicate branch name `{}`", b.name)));
            }
            let rank_ok = match b.kind {
                BranchKind::NumericMlp => b.input.len() == 1,
                BranchKind::SequenceCnn => b.input.len() == 2,
            };
            if !rank_ok || b.input.contains(&0) {
                return Err(Error::Config(format!(
                    "branch `{}` ({:?}) has invalid input shape {:?}",
                    b.name, b.kind, b.input
                )));
            }
            match infer_shape(&b.input, &b.layers)?.as_slice() {
                [w] => widths.push(*w),
                other => return Err(Error::Config(format!(
                    "branch `{}` ends with shape {other:?}; it must end in a flat feature vector",
                    b.name
                ))),
            }
        }
        let total: usize = widths.iter().sum();
        if self.head.input_width != total {
            return Err(Error::Config(format!(
                "head expects {} inputs but the concatenated branch features are {total} wide",
                self.head.input_width
            )));
        }
        if !self
            .head
            .layers
            .iter()
            .any(|l| matches!(l, LayerSpec::Dense { .. }))
        {
            return Err(Error::Config(
                "the head needs at least one dense layer".into(),
            ));
        }
        let out = infer_shape(&[total], &self.head.layers)?;
        if out != [self.head.task.output_width()] {
            return Err(Error::Config(format!(
                "head produces {out:?} but the task needs [{}]",
                self.head.task.output_width()
            )));
        }
        if let Task::Classification { classes } = self.head.task {
            if classes < 2 {
                return Err(Error::Config(
                    "classification needs at least 2 classes".into(),
                ));
            }
        }
        Ok(widths)
    }

    /// Checks that every branch input matches what `features` produces from
    /// well data.
    pub fn check_features(&self) -> Result<()> {
        for b in &self.branches {
            let expected = match b.kind {
                BranchKind::NumericMlp => vec![self.features.numeric_width()],
                BranchKind::SequenceCnn => self.features.curve_shape().to_vec(),
            };
            if b.input != expected {
                return Err(Error::Config(format!(
                    "branch `{}` declares input {:?}, but the feature spec produces {expected:?}",
                    b.name, b.input
                )));
            }
        }
        Ok(())
    }

    pub fn branch(&self, name: &str) -> Option<&BranchSpec> {
        self.branches.iter().find(|b| b.name == name)
    }

    pub fn to_canonical_text(&self) -> String {
        serde_json::to_string(self).expect("model config serializes")
    }

    pub fn from_canonical_text(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// The stock architectures: the hybrid model and the two single-input
/// baselines that reuse its branch architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Numeric MLP branch plus curve CNN branch.
    #[default]
    Hdnn,
    /// Curve CNN branch only.
    Cnn,
    /// Numeric MLP branch over the 4 attributes plus 7 curve means.
    Mlp,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Hdnn => "hdnn",
            Preset::Cnn => "cnn",
            Preset::Mlp => "mlp",
        })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hdnn" => Ok(Preset::Hdnn),
            "cnn" => Ok(Preset::Cnn),
            "mlp" => Ok(Preset::Mlp),
            _ => Err(Error::Config(format!(
                "unknown preset `{s}` (expected hdnn, cnn or mlp)"
            ))),
        }
    }
}

pub const STOCK_DROPOUT: f64 = 0.25;

/// `FC(d→32)-ReLU-FC(32→32)-ReLU`
pub fn stock_numeric_branch(features: &FeatureSpec) -> BranchSpec {
    BranchSpec {
        name: "numeric".into(),
        kind: BranchKind::NumericMlp,
        input: vec![features.numeric_width()],
        layers: vec![
            LayerSpec::Dense { units: 32 },
            LayerSpec::Relu,
            LayerSpec::Dense { units: 32 },
            LayerSpec::Relu,
        ],
    }
}

/// Three conv units (16, 32, 64 channels) with batch norm and ReLU, two
/// max-pools, then global average pooling to 64 features.
pub fn stock_sequence_branch(features: &FeatureSpec) -> BranchSpec {
    BranchSpec {
        name: "sequence".into(),
        kind: BranchKind::SequenceCnn,
        input: features.curve_shape().to_vec(),
        layers: vec![
            LayerSpec::conv_same(16, 5),
            LayerSpec::BatchNorm,
            LayerSpec::Relu,
            LayerSpec::MaxPool1d {
                window: 2,
                stride: 2,
            },
            LayerSpec::conv_same(32, 5),
            LayerSpec::BatchNorm,
            LayerSpec::Relu,
            LayerSpec::MaxPool1d {
                window: 2,
                stride: 2,
            },
            LayerSpec::conv_same(64, 3),
            LayerSpec::BatchNorm,
            LayerSpec::Relu,
            LayerSpec::GlobalAvgPool,
        ],
    }
}

/// `FC(in→64)-ReLU-Dropout(0.25)-FC(64→out)`
pub fn stock_head(input_width: usize, task: Task) -> HeadSpec {
    HeadSpec {
        task,
        input_width,
        layers: vec![
            LayerSpec::Dense { units: 64 },
            LayerSpec::Relu,
            LayerSpec::Dropout {
                rate: STOCK_DROPOUT,
            },
            LayerSpec::Dense {
                units: task.output_width(),
            },
        ],
    }
}

impl ModelConfig {
    /// Builds a validated stock configuration. The `Mlp` preset switches on
    /// curve averages in `features`.
    pub fn preset(
        preset: Preset,
        mut features: FeatureSpec,
        task: Task,
        seed: u64,
    ) -> Result<Self> {
        let branches = match preset {
            Preset::Hdnn => vec![
                stock_numeric_branch(&features),
                stock_sequence_branch(&features),
            ],
            Preset::Cnn => vec![stock_sequence_branch(&features)],
            Preset::Mlp => {
                features.curve_averages = true;
                vec![stock_numeric_branch(&features)]
            }
        };
        Self::from_branches(branches, task, features, seed)
    }

    /// Attaches the stock head to an explicit branch list.
    pub fn from_branches(
        branches: Vec<BranchSpec>,
        task: Task,
        features: FeatureSpec,
        seed: u64,
    ) -> Result<Self> {
        let mut width = 0;
        for b in &branches {
            if let [w] = infer_shape(&b.input, &b.layers)?.as_slice() {
                width += w;
            }
        }
        let config = Self {
            branches,
            head: stock_head(width, task),
            seed,
            features,
        };
        config.validate()?;
        config.check_features()?;
        Ok(config)
    }
}
