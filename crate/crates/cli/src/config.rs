//! The `--config` file: a TOML description of the model, training overrides
//! and data options.
//!
//! ```toml
//! preset = "hdnn"            # hdnn | cnn | mlp; omit when listing branches
//! seed = 0                   # parameter initialization
//! resample_length = 64
//!
//! [train]
//! epochs = 200
//! batch_size = 16
//! learning_rate = 0.001
//! validation_fraction = 0.2
//! patience = 30              # 0 disables early stopping
//! seed = 0
//!
//! [data]
//! dir = "data"               # used when --data is not given
//! test_fraction = 0.2        # held out from training, see `evaluate --split`
//! split_seed = 0
//! ```
//!
//! Instead of a preset, `[[branches]]` tables list branches explicitly and an
//! optional `[head]` table replaces the stock head layers.

use std::path::{Path, PathBuf};

use hdnn::network::{
    infer_shape, stock_head, BranchKind, BranchSpec, CategoricalFeature, FeatureSpec, HeadSpec,
    LayerSpec, ModelConfig, Preset, Task, DEFAULT_RESAMPLE_LENGTH,
};
use hdnn::train::TrainSpec;
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    preset: Option<Preset>,
    seed: u64,
    resample_length: Option<usize>,
    curve_averages: bool,
    categorical: Vec<CategoricalFeature>,
    branches: Option<Vec<BranchFile>>,
    head: Option<HeadFile>,
    train: TrainFile,
    data: DataOptions,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchFile {
    name: String,
    kind: BranchKind,
    /// Defaults to the shape the feature options produce for `kind`.
    input: Option<Vec<usize>>,
    layers: Vec<LayerSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeadFile {
    layers: Vec<LayerSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainFile {
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    validation_fraction: f64,
    patience: usize,
    seed: u64,
}

impl Default for TrainFile {
    fn default() -> Self {
        let spec = TrainSpec::default();
        Self {
            epochs: spec.epochs,
            batch_size: spec.batch_size,
            learning_rate: spec.learning_rate,
            validation_fraction: spec.validation_fraction,
            patience: spec.patience.unwrap_or(0),
            seed: spec.seed,
        }
    }
}

/// Where the data lives and how much of it `train` holds out.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataOptions {
    pub dir: Option<PathBuf>,
    pub test_fraction: f64,
    pub split_seed: u64,
}

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

impl Default for DataOptions {
    fn default() -> Self {
        Self {
            dir: None,
            test_fraction: DEFAULT_TEST_FRACTION,
            split_seed: 0,
        }
    }
}

/// A parsed and validated configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub model: ModelConfig,
    pub train: TrainSpec,
    pub data: DataOptions,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<hdnn::Error> for ConfigError {
    fn from(e: hdnn::Error) -> Self {
        ConfigError(e.to_string())
    }
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<CliConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    parse_config_str(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
}

pub fn parse_config_str(text: &str) -> Result<CliConfig, ConfigError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
    let features = FeatureSpec {
        resample_length: file.resample_length.unwrap_or(DEFAULT_RESAMPLE_LENGTH),
        curve_averages: file.curve_averages,
        categorical: file.categorical,
    };
    let model = match (file.preset, file.branches) {
        (Some(_), Some(_)) => {
            return Err(ConfigError(
                "`preset` and `[[branches]]` conflict; give one or the other".into(),
            ))
        }
        (preset, None) => {
            if file.head.is_some() {
                return Err(ConfigError(
                    "`[head]` needs an explicit `[[branches]]` list".into(),
                ));
            }
            ModelConfig::preset(
                preset.unwrap_or_default(),
                features,
                Task::Regression,
                file.seed,
            )?
        }
        (None, Some(branches)) => {
            let branches: Vec<BranchSpec> = branches
                .into_iter()
                .map(|b| BranchSpec {
                    input: b.input.unwrap_or_else(|| match b.kind {
                        BranchKind::NumericMlp => vec![features.numeric_width()],
                        BranchKind::SequenceCnn => features.curve_shape().to_vec(),
                    }),
                    name: b.name,
                    kind: b.kind,
                    layers: b.layers,
                })
                .collect();
            let mut width = 0;
            for b in &branches {
                if let [w] = infer_shape(&b.input, &b.layers)?.as_slice() {
                    width += w;
                }
            }
            let head = match file.head {
                Some(h) => HeadSpec {
                    task: Task::Regression,
                    input_width: width,
                    layers: h.layers,
                },
                None => stock_head(width, Task::Regression),
            };
            let config = ModelConfig {
                branches,
                head,
                seed: file.seed,
                features,
            };
            config.validate()?;
            config.check_features()?;
            config
        }
    };
    let t = file.train;
    let train = TrainSpec {
        epochs: t.epochs,
        batch_size: t.batch_size,
        learning_rate: t.learning_rate,
        validation_fraction: t.validation_fraction,
        patience: (t.patience > 0).then_some(t.patience),
        seed: t.seed,
    };
    train.validate()?;
    if !(0.0..1.0).contains(&file.data.test_fraction) {
        return Err(ConfigError(format!(
            "data.test_fraction must be in [0, 1), got {}",
            file.data.test_fraction
        )));
    }
    Ok(CliConfig {
        model,
        train,
        data: file.data,
    })
}

/// The configuration used when no file is given.
pub fn default_config() -> CliConfig {
    parse_config_str("").expect("defaults are valid")
}
