//! Mini-batch training, evaluation and prediction.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{split_dataset, MixedDataset, Normalizer};
use crate::error::{Error, Result};
use crate::loss::{cross_entropy_loss, mse_loss};
use crate::metrics::{mae, Metrics};
use crate::network::{HybridModel, Task};
use crate::optim::{AdamConfig, AdamState};
use crate::rng::RngStream;
use crate::tensor::Tensor;

/// Instances per Infer-mode forward pass during evaluation.
const EVAL_CHUNK: usize = 256;

const SHUFFLE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSpec {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Share of the training data held out for validation.
    pub validation_fraction: f64,
    /// Stop after this many epochs without a new best validation loss and
    /// restore the best parameters. `None` trains for all epochs and keeps
    /// the final parameters.
    pub patience: Option<usize>,
    pub seed: u64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 16,
            learning_rate: 1e-3,
            validation_fraction: 0.2,
            patience: Some(30),
            seed: 0,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "batch size must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidArgument(format!(
                "validation fraction must be in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        AdamConfig::default()
            .with_learning_rate(self.learning_rate)
            .validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean mini-batch loss over the epoch, in normalized units.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    /// Validation mean absolute error in label units (regression only).
    pub val_mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept, when a best snapshot was restored.
    pub best_epoch: Option<usize>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// Writes `epoch,train_loss,val_loss,val_mae`; absent values are empty.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |e: std::io::Error| Error::io(path, e);
        let mut out = std::io::BufWriter::new(File::create(path).map_err(io)?);
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(out, "epoch,train_loss,val_loss,val_mae").map_err(io)?;
        for r in &self.epochs {
            writeln!(
                out,
                "{},{},{},{}",
                r.epoch,
                r.train_loss,
                opt(r.val_loss),
                opt(r.val_mae)
            )
            .map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: HybridModel,
    pub history: TrainHistory,
    pub optimizer: AdamState,
}

fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    // batch norm needs two samples; fold a trailing singleton into its neighbour
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        out.pop();
        let n = out.len();
        let start = (n - 1) * size;
        out[n - 1] = &order[start..];
    }
    out
}

fn class_labels(targets: &Tensor, classes: usize) -> Result<Vec<usize>> {
    targets
        .data()
        .iter()
        .map(|&y| {
            if y >= 0.0 && y.fract() == 0.0 && (y as usize) < classes {
                Ok(y as usize)
            } else {
                Err(Error::Data(format!(
                    "label {y} is not a class index below {classes}"
                )))
            }
        })
        .collect()
}

fn loss_and_grad(task: Task, pred: &Tensor, targets: &Tensor) -> Result<(f64, Tensor)> {
    match task {
        Task::Regression => mse_loss(pred, targets),
        Task::Classification { classes } => {
            cross_entropy_loss(pred, &class_labels(targets, classes)?)
        }
    }
}

/// Infer-mode outputs for every instance, `[M × out]`, in dataset order.
fn infer_all(model: &HybridModel, dataset: &MixedDataset) -> Result<Vec<Tensor>> {
    let all: Vec<usize> = (0..dataset.len()).collect();
    all.chunks(EVAL_CHUNK)
        .map(|chunk| model.predict(&model.inputs_for(dataset, chunk)?))
        .collect()
}

fn validation_scores(
    model: &HybridModel,
    val: &MixedDataset,
    normalizer: &Normalizer,
) -> Result<(f64, Option<f64>)> {
    let task = model.config().head.task;
    let outputs = infer_all(model, val)?;
    let all: Vec<usize> = (0..val.len()).collect();
    let mut total = 0.0;
    for (out, chunk) in outputs.iter().zip(all.chunks(EVAL_CHUNK)) {
        let targets = val.label_batch(chunk)?;
        total += loss_and_grad(task, out, &targets)?.0 * chunk.len() as f64;
    }
    let loss = total / val.len() as f64;
    let mae = match task {
        Task::Regression => {
            let denorm = |v: &f64| normalizer.denormalize_label(*v);
            let pred: Vec<f64> = outputs
                .iter()
                .flat_map(|t| t.data().iter().map(denorm))
                .collect();
            let target: Vec<f64> = val.labels().expect("labelled").iter().map(denorm).collect();
            Some(mae(&pred, &target)?)
        }
        Task::Classification { .. } => None,
    };
    Ok((loss, mae))
}

/// Trains with Adam on mini-batches.
///
/// A `validation_fraction` share of `dataset` is held out (seeded split);
/// normalizers are fitted on the remainder and attached to the returned
/// model. Each epoch visits the fit set in a fresh seeded order. Regression
/// uses MSE on normalized labels; classification uses cross-entropy on
/// class-index labels.
pub fn train(mut model: HybridModel, dataset: &MixedDataset, spec: &TrainSpec) -> Result<Trained> {
    spec.validate()?;
    if dataset.labels().is_none() {
        return Err(Error::Data("training needs a labelled dataset".into()));
    }
    let task = model.config().head.task;
    let (fit, val) = if spec.validation_fraction > 0.0 {
        split_dataset(dataset, 1.0 - spec.validation_fraction, spec.seed)?
    } else {
        (dataset.clone(), dataset.subset(&[])?)
    };
    if fit.is_empty() {
        return Err(Error::Data("the training split is empty".into()));
    }
    let mut normalizer = Normalizer::fit(&fit)?;
    if matches!(task, Task::Classification { .. }) {
        normalizer = normalizer.without_label_scaling();
    }
    let fit = normalizer.apply(&fit)?;
    let val = normalizer.apply(&val)?;

    let mut optimizer = AdamState::new(
        AdamConfig::default().with_learning_rate(spec.learning_rate),
        &model.parameter_shapes(),
    )?;
    let root = RngStream::new(spec.seed);
    let mut shuffle = root.fork(SHUFFLE_STREAM);
    let mut dropout = root.fork(DROPOUT_STREAM);

    let mut history = TrainHistory::default();
    let mut best: Option<(f64, usize, HybridModel)> = None;
    let mut order: Vec<usize> = (0..fit.len()).collect();
    for epoch in 1..=spec.epochs {
        shuffle.shuffle(&mut order);
        let mut total = 0.0;
        for batch in batches(&order, spec.batch_size) {
            let inputs = model.inputs_for(&fit, batch)?;
            let targets = fit.label_batch(batch)?;
            let (pred, cache) = model.forward_train(&inputs, &mut dropout)?;
            let (loss, grad) = loss_and_grad(task, &pred, &targets)?;
            if !loss.is_finite() {
                return Err(Error::Data(format!("loss diverged at epoch {epoch}")));
            }
            total += loss * batch.len() as f64;
            let grads = model.backward(cache, &grad)?;
            let mut params: Vec<&mut Tensor> =
                model.parameters_mut().into_iter().map(|(_, t)| t).collect();
            optimizer.step(&mut params, &grads.tensors())?;
        }
        let (val_loss, val_mae) = if val.is_empty() {
            (None, None)
        } else {
            let (l, m) = validation_scores(&model, &val, &normalizer)?;
            (Some(l), m)
        };
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: total / fit.len() as f64,
            val_loss,
            val_mae,
        });
        if let (Some(patience), Some(loss)) = (spec.patience, val_loss) {
            if best.as_ref().map_or(true, |(b, _, _)| loss < *b) {
                best = Some((loss, epoch, model.clone()));
            } else if epoch - best.as_ref().expect("set").1 >= patience {
                break;
            }
        }
    }
    if let Some((_, epoch, snapshot)) = best {
        model = snapshot;
        history.best_epoch = Some(epoch);
    }
    model.set_normalizer(Some(normalizer));
    Ok(Trained {
        model,
        history,
        optimizer,
    })
}

fn regression_normalizer(model: &HybridModel) -> Result<&Normalizer> {
    if let Task::Classification { .. } = model.config().head.task {
        return Err(Error::InvalidArgument(
            "evaluate and predict report production values; this model is a classifier".into(),
        ));
    }
    model.normalizer().ok_or_else(|| {
        Error::InvalidArgument("model has no fitted normalizer; train it first".into())
    })
}

/// Infer-mode predictions in label units, in dataset order.
pub fn predict_values(model: &HybridModel, dataset: &MixedDataset) -> Result<Vec<f64>> {
    let normalizer = regression_normalizer(model)?;
    let input = normalizer.apply(&dataset.clone().without_labels())?;
    Ok(infer_all(model, &input)?
        .iter()
        .flat_map(|t| {
            t.data()
                .iter()
                .map(|&z| normalizer.denormalize_label(z))
                .collect::<Vec<_>>()
        })
        .collect())
}

/// MSE, MAE and r² of the model's predictions against the dataset labels.
pub fn evaluate(model: &HybridModel, dataset: &MixedDataset) -> Result<Metrics> {
    let labels = dataset
        .labels()
        .ok_or_else(|| Error::Data("evaluation needs a labelled dataset".into()))?;
    Metrics::compute(&predict_values(model, dataset)?, labels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub well_id: String,
    pub formation_id: String,
    pub predicted: f64,
    pub measured: Option<f64>,
}

/// One prediction per instance, in input order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionSet {
    pub rows: Vec<PredictionRow>,
}

const PREDICTION_HEADER: [&str; 4] = [
    "well_id",
    "formation_id",
    "predicted_production_t_per_d",
    "measured_production_t_per_d",
];

/// Predictions for every instance; measured values are echoed when the
/// dataset is labelled.
pub fn predict(model: &HybridModel, dataset: &MixedDataset) -> Result<PredictionSet> {
    let values = predict_values(model, dataset)?;
    let rows = dataset
        .keys()
        .iter()
        .zip(values)
        .enumerate()
        .map(|(i, (key, predicted))| PredictionRow {
            well_id: key.well_id.clone(),
            formation_id: key.formation_id.clone(),
            predicted,
            measured: dataset.labels().map(|l| l[i]),
        })
        .collect();
    Ok(PredictionSet { rows })
}

impl PredictionSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Metrics over rows that carry a measured value.
    pub fn metrics(&self) -> Result<Metrics> {
        let (pred, target): (Vec<f64>, Vec<f64>) = self
            .rows
            .iter()
            .filter_map(|r| r.measured.map(|m| (r.predicted, m)))
            .unzip();
        Metrics::compute(&pred, &target)
    }

    /// Writes the CSV. Values use the shortest representation that parses
    /// back to the same `f64`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let with_measured = self.rows.iter().any(|r| r.measured.is_some());
        let err = |e: csv::Error| Error::io(path, e.into());
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        let width = if with_measured { 4 } else { 3 };
        w.write_record(&PREDICTION_HEADER[..width]).map_err(err)?;
        for r in &self.rows {
            let mut fields = vec![
                r.well_id.clone(),
                r.formation_id.clone(),
                r.predicted.to_string(),
            ];
            if with_measured {
                fields.push(r.measured.map(|m| m.to_string()).unwrap_or_default());
            }
            w.write_record(&fields).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = path.display().to_string();
        let parse_err = |line: u64, column: &str, message: String| Error::Parse {
            file: file.clone(),
            line,
            column: column.into(),
            message,
        };
        let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(0, "", format!("{other:?}")),
        })?;
        let headers = r
            .headers()
            .map_err(|e| parse_err(1, "", e.to_string()))?
            .clone();
        let with_measured = match headers.len() {
            3 | 4 if headers.iter().zip(PREDICTION_HEADER).all(|(a, b)| a == b) => {
                headers.len() == 4
            }
            _ => return Err(parse_err(1, "", format!("unexpected header {headers:?}"))),
        };
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec
                .map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), "", e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            let number = |i: usize| -> Result<f64> {
                rec[i].parse().map_err(|_| {
                    parse_err(
                        line,
                        PREDICTION_HEADER[i],
                        format!("`{}` is not a number", &rec[i]),
                    )
                })
            };
            rows.push(PredictionRow {
                well_id: rec[0].to_string(),
                formation_id: rec[1].to_string(),
                predicted: number(2)?,
                measured: if with_measured && !rec[3].is_empty() {
                    Some(number(3)?)
                } else {
                    None
                },
            });
        }
        Ok(Self { rows })
    }
}
