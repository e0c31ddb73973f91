//! Finite-difference verification of every backward pass.
//!
//! Each [`Case`] builds a [`Probe`]: a function of some tensors together with
//! its claimed vector-Jacobian product. The checker contracts the output with
//! a random projection `R`, so the scalar `L = Σ R ⊙ f(x)` has gradient
//! `backward(x, R)`, and compares every partial derivative with a central
//! difference.

use std::fmt;

use crate::error::{Error, Result};
use crate::layers::{
    batch_norm_backward, batch_norm_train, concat_features, conv1d, conv1d_backward, dropout,
    dropout_backward, fully_connected, fully_connected_backward, global_avg_pool,
    global_avg_pool_backward, max_pool1d, max_pool1d_backward, relu, relu_backward, split_features,
    LayerMode,
};
use crate::loss::{cross_entropy_loss, mse_loss};
use crate::network::{
    BranchKind, BranchSpec, FeatureSpec, HeadSpec, HybridModel, LayerSpec, ModelConfig, Task,
};
use crate::rng::RngStream;
use crate::tensor::Tensor;

/// Central-difference step.
pub const STEP: f64 = 1e-5;
/// Largest accepted relative error.
pub const TOLERANCE: f64 = 1e-4;
/// Denominator floor, so partials that are both ~0 compare absolutely.
const FLOOR: f64 = 1e-5;
/// Inputs closer than this to a ReLU or max-pool kink are redrawn.
const MIN_KINK_MARGIN: f64 = 1e-3;

type ForwardFn = Box<dyn Fn(&[Tensor]) -> Result<Tensor>>;
type BackwardFn = Box<dyn Fn(&[Tensor], &Tensor) -> Result<Vec<Tensor>>>;

/// A differentiable function of `inputs` and its vector-Jacobian product.
pub struct Probe {
    pub inputs: Vec<Tensor>,
    pub forward: ForwardFn,
    /// Given the inputs and `dL/dy`, returns `dL/dx` for every input.
    pub backward: BackwardFn,
}

/// A named gradient check. `build` draws a fresh probe from the stream.
pub struct Case {
    pub name: String,
    pub build: Box<dyn Fn(&mut RngStream) -> Result<Probe>>,
}

impl Case {
    pub fn new(
        name: impl Into<String>,
        build: impl Fn(&mut RngStream) -> Result<Probe> + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            build: Box::new(build),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub name: String,
    /// Largest relative error over all checked partials; infinite when the
    /// case could not be evaluated.
    pub max_relative_error: f64,
    pub partials: usize,
    /// Set when the case failed to run (shape errors and the like).
    pub error: Option<String>,
}

impl CaseResult {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.max_relative_error < TOLERANCE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub seed: u64,
    pub cases: Vec<CaseResult>,
}

impl GradcheckReport {
    pub fn all_passed(&self) -> bool {
        self.cases.iter().all(CaseResult::passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.cases
            .iter()
            .filter(|c| !c.passed())
            .map(|c| c.name.as_str())
            .collect()
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "gradcheck seed={} step={STEP:e} tolerance={TOLERANCE:e}",
            self.seed
        )?;
        for c in &self.cases {
            let verdict = if c.passed() { "PASS" } else { "FAIL" };
            write!(
                f,
                "{verdict} {:<18} max_rel_err={:.3e} partials={}",
                c.name, c.max_relative_error, c.partials
            )?;
            if let Some(e) = &c.error {
                write!(f, " error={e}")?;
            }
            writeln!(f)?;
        }
        let failed = self.failures().len();
        write!(
            f,
            "{} of {} cases passed",
            self.cases.len() - failed,
            self.cases.len()
        )
    }
}

fn projected(probe: &Probe, inputs: &[Tensor], r: &Tensor) -> Result<f64> {
    Ok((probe.forward)(inputs)?.mul(r)?.sum_all())
}

/// Largest relative error between analytic and central-difference partials.
pub fn check_probe(probe: &Probe, rng: &mut RngStream) -> Result<(f64, usize)> {
    let y = (probe.forward)(&probe.inputs)?;
    let r = rng.normal_tensor(y.shape().to_vec(), 0.0, 1.0)?;
    let analytic = (probe.backward)(&probe.inputs, &r)?;
    let mut worst: f64 = 0.0;
    let mut partials = 0;
    let mut work = probe.inputs.clone();
    for (k, grad) in analytic.iter().enumerate() {
        if grad.shape() != probe.inputs[k].shape() {
            return Err(Error::Shape(format!(
                "gradient {k} is {:?} for an input of {:?}",
                grad.shape(),
                probe.inputs[k].shape()
            )));
        }
        for i in 0..work[k].len() {
            let original = work[k].data()[i];
            work[k].data_mut()[i] = original + STEP;
            let plus = projected(probe, &work, &r)?;
            work[k].data_mut()[i] = original - STEP;
            let minus = projected(probe, &work, &r)?;
            work[k].data_mut()[i] = original;
            let numeric = (plus - minus) / (2.0 * STEP);
            let a = grad.data()[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
            worst = worst.max(rel);
            partials += 1;
        }
    }
    Ok((worst, partials))
}

/// Runs `cases`, each on its own sub-stream of `seed`.
pub fn run_cases(cases: &[Case], seed: u64) -> GradcheckReport {
    let root = RngStream::new(seed);
    let cases = cases
        .iter()
        .enumerate()
        .map(|(i, case)| {
            let mut rng = root.fork(i as u64);
            match (case.build)(&mut rng).and_then(|p| check_probe(&p, &mut rng)) {
                Ok((err, partials)) => CaseResult {
                    name: case.name.clone(),
                    max_relative_error: err,
                    partials,
                    error: None,
                },
                Err(e) => CaseResult {
                    name: case.name.clone(),
                    max_relative_error: f64::INFINITY,
                    partials: 0,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    GradcheckReport { seed, cases }
}

/// Every layer, both losses, and two small two-branch models.
pub fn run_suite(seed: u64) -> GradcheckReport {
    run_cases(&stock_cases(), seed)
}

fn normal(rng: &mut RngStream, shape: &[usize]) -> Result<Tensor> {
    rng.normal_tensor(shape.to_vec(), 0.0, 1.0)
}

/// Standard normal values pushed at least 0.05 away from zero.
fn away_from_zero(rng: &mut RngStream, shape: &[usize]) -> Result<Tensor> {
    Ok(normal(rng, shape)?.map(|v| v + 0.05 * v.signum()))
}

/// Rows whose entries are a shuffled ladder with step 0.1, so every window
/// has a clear winner.
fn distinct_rows(rng: &mut RngStream, shape: &[usize]) -> Result<Tensor> {
    let len = *shape.last().expect("non-scalar");
    let rows = shape.iter().product::<usize>() / len;
    let mut data = Vec::with_capacity(rows * len);
    for _ in 0..rows {
        let mut ladder: Vec<f64> = (0..len)
            .map(|i| 0.1 * i as f64 - 0.05 * len as f64)
            .collect();
        rng.shuffle(&mut ladder);
        data.extend(ladder);
    }
    Tensor::new(shape.to_vec(), data)
}

/// Signature of a conv1d backward implementation: `(x, K, dy, stride,
/// padding) → (dx, dK, db)`.
pub type ConvBackward =
    fn(&Tensor, &Tensor, &Tensor, usize, usize) -> Result<(Tensor, Tensor, Tensor)>;

/// The conv1d case with a pluggable backward, so the checker itself can be
/// tested against a broken implementation.
pub fn conv1d_case_with(backward: ConvBackward) -> Case {
    const STRIDE: usize = 2;
    const PADDING: usize = 1;
    Case::new("conv1d", move |rng| {
        Ok(Probe {
            inputs: vec![
                normal(rng, &[2, 3, 7])?,
                normal(rng, &[4, 3, 3])?,
                normal(rng, &[4])?,
            ],
            forward: Box::new(|t| conv1d(&t[0], &t[1], &t[2], STRIDE, PADDING)),
            backward: Box::new(move |t, dy| {
                let (dx, dk, db) = backward(&t[0], &t[1], dy, STRIDE, PADDING)?;
                Ok(vec![dx, dk, db])
            }),
        })
    })
}

fn model_case(name: &str, task: Task) -> Case {
    Case::new(name, move |rng| {
        let features = FeatureSpec {
            resample_length: 8,
            ..FeatureSpec::default()
        };
        let config = |seed| ModelConfig {
            branches: vec![
                BranchSpec {
                    name: "numeric".into(),
                    kind: BranchKind::NumericMlp,
                    input: vec![3],
                    layers: vec![LayerSpec::Dense { units: 4 }, LayerSpec::Relu],
                },
                BranchSpec {
                    name: "sequence".into(),
                    kind: BranchKind::SequenceCnn,
                    input: vec![2, 8],
                    layers: vec![
                        LayerSpec::conv_same(3, 3),
                        LayerSpec::BatchNorm,
                        LayerSpec::Relu,
                        LayerSpec::MaxPool1d {
                            window: 2,
                            stride: 2,
                        },
                        LayerSpec::GlobalAvgPool,
                    ],
                },
            ],
            head: HeadSpec {
                task,
                input_width: 7,
                layers: vec![
                    LayerSpec::Dense { units: 5 },
                    LayerSpec::Relu,
                    LayerSpec::Dropout { rate: 0.25 },
                    LayerSpec::Dense {
                        units: task.output_width(),
                    },
                ],
            },
            seed,
            features: features.clone(),
        };
        // redraw until no ReLU or max-pool input sits near a kink
        for _ in 0..64 {
            let model = HybridModel::build(config(rng.next_u64()))?;
            let batch = 4;
            let inputs = vec![normal(rng, &[batch, 3])?, normal(rng, &[batch, 2, 8])?];
            let labels: Vec<usize> = (0..batch).map(|_| rng.below(task.output_width())).collect();
            let targets = normal(rng, &[batch, 1])?;
            let dropout_rng = rng.fork(0xd20);
            let (_, cache) = model.forward(&inputs, LayerMode::Train, &mut dropout_rng.clone())?;
            if cache.kink_margin() < MIN_KINK_MARGIN {
                continue;
            }
            return Ok(model_probe(
                model,
                inputs,
                dropout_rng,
                task,
                labels,
                targets,
            ));
        }
        Err(Error::InvalidArgument(
            "no kink-free draw in 64 attempts".into(),
        ))
    })
}

/// Probe over the model parameters plus both branch inputs; the output is
/// the batch loss.
fn model_probe(
    model: HybridModel,
    inputs: Vec<Tensor>,
    dropout_rng: RngStream,
    task: Task,
    labels: Vec<usize>,
    targets: Tensor,
) -> Probe {
    let params: Vec<Tensor> = model
        .parameters()
        .into_iter()
        .map(|(_, t)| t.clone())
        .collect();
    let n_params = params.len();
    let all: Vec<Tensor> = params.into_iter().chain(inputs).collect();
    let with = move |values: &[Tensor]| {
        let mut m = model.clone();
        for ((_, slot), v) in m.parameters_mut().into_iter().zip(values) {
            *slot = v.clone();
        }
        m
    };
    let with_b = with.clone();
    let (labels_b, targets_b) = (labels.clone(), targets.clone());
    let rng_b = dropout_rng.clone();
    let loss = move |pred: &Tensor, labels: &[usize], targets: &Tensor| match task {
        Task::Regression => mse_loss(pred, targets),
        Task::Classification { .. } => cross_entropy_loss(pred, labels),
    };
    Probe {
        inputs: all,
        forward: Box::new(move |t| {
            let m = with(&t[..n_params]);
            let (y, _) = m.forward(&t[n_params..], LayerMode::Train, &mut dropout_rng.clone())?;
            Tensor::vector(vec![loss(&y, &labels, &targets)?.0])
        }),
        backward: Box::new(move |t, dy| {
            let m = with_b(&t[..n_params]);
            let (y, cache) = m.forward(&t[n_params..], LayerMode::Train, &mut rng_b.clone())?;
            let (_, g) = loss(&y, &labels_b, &targets_b)?;
            let (grads, dx) = m.backward_with_input_grads(cache, &g.scale(dy.data()[0]))?;
            Ok(grads.tensors().into_iter().cloned().chain(dx).collect())
        }),
    }
}

pub fn stock_cases() -> Vec<Case> {
    vec![
        Case::new("dense", |rng| {
            Ok(Probe {
                inputs: vec![
                    normal(rng, &[3, 4])?,
                    normal(rng, &[4, 2])?,
                    normal(rng, &[2])?,
                ],
                forward: Box::new(|t| fully_connected(&t[0], &t[1], &t[2])),
                backward: Box::new(|t, dy| {
                    let (dx, dw, db) = fully_connected_backward(&t[0], &t[1], dy)?;
                    Ok(vec![dx, dw, db])
                }),
            })
        }),
        conv1d_case_with(conv1d_backward),
        Case::new("batch_norm", |rng| {
            Ok(Probe {
                inputs: vec![
                    normal(rng, &[3, 2, 4])?,
                    normal(rng, &[2])?,
                    normal(rng, &[2])?,
                ],
                forward: Box::new(|t| Ok(batch_norm_train(&t[0], &t[1], &t[2], 1e-5)?.0)),
                backward: Box::new(|t, dy| {
                    let (_, cache) = batch_norm_train(&t[0], &t[1], &t[2], 1e-5)?;
                    let (dx, dg, db) = batch_norm_backward(cache, &t[1], dy)?;
                    Ok(vec![dx, dg, db])
                }),
            })
        }),
        Case::new("relu", |rng| {
            Ok(Probe {
                inputs: vec![away_from_zero(rng, &[3, 5])?],
                forward: Box::new(|t| Ok(relu(&t[0]))),
                backward: Box::new(|t, dy| Ok(vec![relu_backward(&t[0], dy)?])),
            })
        }),
        Case::new("dropout", |rng| {
            let stream = rng.fork(1);
            let mask_stream = stream.clone();
            Ok(Probe {
                inputs: vec![normal(rng, &[4, 6])?],
                forward: Box::new(move |t| {
                    Ok(dropout(&t[0], 0.3, &mut stream.clone(), LayerMode::Train)?.0)
                }),
                backward: Box::new(move |t, dy| {
                    let (_, mask) =
                        dropout(&t[0], 0.3, &mut mask_stream.clone(), LayerMode::Train)?;
                    Ok(vec![dropout_backward(mask.as_ref(), dy)?])
                }),
            })
        }),
        Case::new("max_pool1d", |rng| {
            Ok(Probe {
                inputs: vec![distinct_rows(rng, &[2, 3, 7])?],
                forward: Box::new(|t| Ok(max_pool1d(&t[0], 3, 2)?.0)),
                backward: Box::new(|t, dy| {
                    let (_, source) = max_pool1d(&t[0], 3, 2)?;
                    Ok(vec![max_pool1d_backward(t[0].shape(), &source, dy)?])
                }),
            })
        }),
        Case::new("global_avg_pool", |rng| {
            Ok(Probe {
                inputs: vec![normal(rng, &[2, 3, 5])?],
                forward: Box::new(|t| global_avg_pool(&t[0])),
                backward: Box::new(|t, dy| Ok(vec![global_avg_pool_backward(t[0].shape(), dy)?])),
            })
        }),
        Case::new("concat", |rng| {
            Ok(Probe {
                inputs: vec![normal(rng, &[3, 2])?, normal(rng, &[3, 4])?],
                forward: Box::new(|t| concat_features(&[&t[0], &t[1]])),
                backward: Box::new(|_, dy| split_features(dy, &[2, 4])),
            })
        }),
        Case::new("mse_loss", |rng| {
            let target = normal(rng, &[5, 1])?;
            let target_b = target.clone();
            Ok(Probe {
                inputs: vec![normal(rng, &[5, 1])?],
                forward: Box::new(move |t| Tensor::vector(vec![mse_loss(&t[0], &target)?.0])),
                backward: Box::new(move |t, dy| {
                    Ok(vec![mse_loss(&t[0], &target_b)?.1.scale(dy.data()[0])])
                }),
            })
        }),
        Case::new("cross_entropy", |rng| {
            let labels: Vec<usize> = (0..4).map(|_| rng.below(3)).collect();
            let labels_b = labels.clone();
            Ok(Probe {
                inputs: vec![normal(rng, &[4, 3])?],
                forward: Box::new(move |t| {
                    Tensor::vector(vec![cross_entropy_loss(&t[0], &labels)?.0])
                }),
                backward: Box::new(move |t, dy| {
                    Ok(vec![cross_entropy_loss(&t[0], &labels_b)?
                        .1
                        .scale(dy.data()[0])])
                }),
            })
        }),
        model_case("model_regression", Task::Regression),
        model_case("model_classifier", Task::Classification { classes: 3 }),
    ]
}
