//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.
//!
//! ```text
//! cargo test --release -p hdnn-cli --test acceptance
//! ```
//!
//! Set `HDNN_ACCEPTANCE_SKIP_BENCHMARK=1` to leave out the benchmark, which
//! trains three models on the full synthetic block.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use hdnn::data::{
    build_dataset, load_dataset, one_hot_encode, resample_segment, split_dataset, synth_wells,
    write_attributes, Depth, InstanceKey, MixedDataset, Normalizer, Segment, SynthConfig,
    CURVE_CHANNELS,
};
use hdnn::gradcheck::{run_suite, TOLERANCE};
use hdnn::layers::{batch_norm_train, conv1d, max_pool1d, Layer, LayerMode};
use hdnn::loss::{cross_entropy_loss, mse_loss};
use hdnn::network::{
    decode_checkpoint, encode_checkpoint, infer_shape, stock_numeric_branch, stock_sequence_branch,
    FeatureSpec, HybridModel, ModelConfig, Preset, Task,
};
use hdnn::optim::{AdamConfig, AdamState};
use hdnn::rng::RngStream;
use hdnn::train::{evaluate, predict_values, train, PredictionSet, TrainSpec};
use hdnn::Tensor;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// gradient fidelity

fn gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for seed in [1, 2, 3] {
        let report = run_suite(seed);
        ensure!(
            report.all_passed(),
            "seed {seed}: {:?} failed\n{report}",
            report.failures()
        );
        worst = report
            .cases
            .iter()
            .map(|c| c.max_relative_error)
            .fold(worst, f64::max);
        cases += report.cases.len();
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    Ok(format!(
        "{cases} case runs over seeds 1-3, max rel err {worst:.2e} < {TOLERANCE:e}, {:.1}s",
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------------------
// kernel oracles

fn conv_loops(x: &Tensor, k: &Tensor, b: &Tensor, stride: usize, padding: usize) -> Vec<f64> {
    let (batch, c_in, len) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (c_out, width) = (k.shape()[0], k.shape()[2]);
    let out_len = (len + 2 * padding - width) / stride + 1;
    let mut out = Vec::new();
    for n in 0..batch {
        for o in 0..c_out {
            for t in 0..out_len {
                let mut acc = 0.0;
                for c in 0..c_in {
                    for j in 0..width {
                        let p = (t * stride + j) as i64 - padding as i64;
                        if (0..len as i64).contains(&p) {
                            acc += x.get(&[n, c, p as usize]).unwrap() * k.get(&[o, c, j]).unwrap();
                        }
                    }
                }
                out.push(acc + b.data()[o]);
            }
        }
    }
    out
}

fn pool_loops(x: &Tensor, window: usize, stride: usize) -> Vec<f64> {
    let (batch, channels, len) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let mut out = Vec::new();
    for n in 0..batch {
        for c in 0..channels {
            for t in (0..=len - window).step_by(stride) {
                out.push(
                    (t..t + window)
                        .map(|j| x.get(&[n, c, j]).unwrap())
                        .fold(f64::NEG_INFINITY, f64::max),
                );
            }
        }
    }
    out
}

fn kernel_oracles() -> Outcome {
    let mut rng = RngStream::new(2024);
    for i in 0..100 {
        let (batch, c_in, c_out) = (1 + rng.below(3), 1 + rng.below(4), 1 + rng.below(4));
        let (width, padding, stride) = (1 + rng.below(5), rng.below(3), 1 + rng.below(3));
        let len = width.saturating_sub(2 * padding).max(1) + rng.below(10);
        let x = ok(rng.normal_tensor(vec![batch, c_in, len], 0.0, 1.0))?;
        let k = ok(rng.normal_tensor(vec![c_out, c_in, width], 0.0, 1.0))?;
        let b = ok(rng.normal_tensor(vec![c_out], 0.0, 1.0))?;
        let got = ok(conv1d(&x, &k, &b, stride, padding))?;
        ensure!(
            got.data() == conv_loops(&x, &k, &b, stride, padding).as_slice(),
            "conv1d shape {i} differs"
        );

        let (window, stride) = (1 + rng.below(4), 1 + rng.below(3));
        let shape = vec![1 + rng.below(3), 1 + rng.below(4), window + rng.below(10)];
        let x = ok(rng.normal_tensor(shape, 0.0, 1.0))?;
        let (got, _) = ok(max_pool1d(&x, window, stride))?;
        ensure!(
            got.data() == pool_loops(&x, window, stride).as_slice(),
            "max_pool1d shape {i} differs"
        );
    }
    Ok("100 random shapes each, exact equality".into())
}

// ---------------------------------------------------------------------------
// closed-form oracles

fn adam_by_hand(steps: i32, g: f64, c: AdamConfig) -> f64 {
    let (mut w, mut m, mut v) = (0.0, 0.0, 0.0);
    for t in 1..=steps {
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v = c.beta2 * v + (1.0 - c.beta2) * g * g;
        w -= c.learning_rate * (m / (1.0 - c.beta1.powi(t)))
            / ((v / (1.0 - c.beta2.powi(t))).sqrt() + c.epsilon);
    }
    w
}

const ADAM_LITERAL: f64 = -9.99999995e-4;

fn closed_form_oracles() -> Outcome {
    let pred = ok(Tensor::new(vec![2, 1], vec![1.0, 2.0]))?;
    let (loss, grad) = ok(mse_loss(&pred, &ok(Tensor::zeros(vec![2, 1]))?))?;
    ensure!(
        loss == 2.5 && grad.data() == [1.0, 2.0],
        "mse gave {loss}, {:?}",
        grad.data()
    );

    let (ce, _) = ok(cross_entropy_loss(
        &ok(Tensor::new(vec![1, 2], vec![0.7, 0.7]))?,
        &[0],
    ))?;
    ensure!(
        (ce - std::f64::consts::LN_2).abs() < 1e-9,
        "cross-entropy gave {ce}"
    );

    let config = AdamConfig::default();
    let mut state = ok(AdamState::new(config, &[vec![1]]))?;
    let mut w = ok(Tensor::zeros(vec![1]))?;
    let g = ok(Tensor::full(vec![1], 1.0))?;
    ok(state.step(&mut [&mut w], &[&g]))?;
    let first = w.data()[0];
    let expected = adam_by_hand(1, 1.0, config);
    ensure!(
        (first - expected).abs() < 1e-12,
        "adam step 1 gave {first:e}, oracle {expected:e}"
    );
    ok(state.step(&mut [&mut w], &[&g]))?;
    let second = w.data()[0];
    ensure!(
        (second - adam_by_hand(2, 1.0, config)).abs() < 1e-9,
        "adam step 2 gave {second:e}"
    );

    let x = ok(Tensor::new(vec![2, 1], vec![1.0, 3.0]))?;
    let (y, _) = ok(batch_norm_train(
        &x,
        &ok(Tensor::full(vec![1], 1.0))?,
        &ok(Tensor::zeros(vec![1]))?,
        1e-5,
    ))?;
    ensure!(
        (y.data()[0] + 1.0).abs() < 1e-4 && (y.data()[1] - 1.0).abs() < 1e-4,
        "batch norm gave {:?}",
        y.data()
    );

    Ok(format!(
        "mse 2.5/[1,2], ce ln2, adam {first:.10e} (oracle {expected:.10e}), bn [-1,1]; \
         note: the listed adam value {ADAM_LITERAL:e} is {:.1e} from the exact update -lr/(1+eps), beyond 1e-12",
        (ADAM_LITERAL - expected).abs()
    ))
}

// ---------------------------------------------------------------------------
// equation-structure invariants

fn small_features() -> FeatureSpec {
    FeatureSpec {
        resample_length: 16,
        ..FeatureSpec::default()
    }
}

fn random_inputs(
    features: &FeatureSpec,
    batch: usize,
    seed: u64,
) -> Result<(Tensor, Tensor), String> {
    let mut rng = RngStream::new(seed);
    let [c, l] = features.curve_shape();
    Ok((
        ok(rng.normal_tensor(vec![batch, features.numeric_width()], 0.0, 1.0))?,
        ok(rng.normal_tensor(vec![batch, c, l], 0.0, 1.0))?,
    ))
}

fn equation_structure() -> Outcome {
    let features = small_features();
    for preset in [Preset::Hdnn, Preset::Cnn, Preset::Mlp] {
        let config = ok(ModelConfig::preset(
            preset,
            features.clone(),
            Task::Regression,
            0,
        ))?;
        let mut sum = 0;
        for b in &config.branches {
            sum += ok(infer_shape(&b.input, &b.layers))?[0];
        }
        ensure!(
            sum == config.head.input_width,
            "{preset}: widths sum {sum}, head takes {}",
            config.head.input_width
        );
    }

    let build = |order: [bool; 2]| -> Result<HybridModel, String> {
        let branches = order
            .iter()
            .map(|&numeric_first| {
                if numeric_first {
                    stock_numeric_branch(&features)
                } else {
                    stock_sequence_branch(&features)
                }
            })
            .collect();
        ok(HybridModel::build(ok(ModelConfig::from_branches(
            branches,
            Task::Regression,
            features.clone(),
            9,
        ))?))
    };
    let mut a = build([true, false])?;
    let mut b = build([false, true])?;
    let (xn, xs) = random_inputs(&features, 8, 1)?;
    ok(a.forward_train(&[xn, xs], &mut RngStream::new(2)))?;
    let params: HashMap<String, Tensor> = a
        .parameters()
        .into_iter()
        .map(|(n, t)| (n, t.clone()))
        .collect();
    let buffers: HashMap<String, Tensor> = a
        .buffers()
        .into_iter()
        .map(|(n, t)| (n, t.clone()))
        .collect();
    for (name, slot) in b.parameters_mut() {
        let t = &params[&name];
        *slot = if name == "head.0.weight" {
            let cols = t.shape()[1];
            let rows: Vec<&[f64]> = t.data().chunks(cols).collect();
            let data = rows[32..]
                .iter()
                .chain(&rows[..32])
                .flat_map(|r| r.iter().copied())
                .collect();
            ok(Tensor::new(t.shape().to_vec(), data))?
        } else {
            t.clone()
        };
    }
    for (name, slot) in b.buffers_mut() {
        *slot = buffers[&name].clone();
    }
    for seed in 10..15 {
        let (xn, xs) = random_inputs(&features, 6, seed)?;
        let ya = ok(a.predict(&[xn.clone(), xs.clone()]))?;
        let yb = ok(b.predict(&[xs, xn]))?;
        let same = ya
            .data()
            .iter()
            .zip(yb.data())
            .all(|(p, q)| p.to_bits() == q.to_bits());
        ensure!(
            same,
            "branch permutation changed predictions: {ya:?} vs {yb:?}"
        );
    }

    let mlp = ok(HybridModel::build(ok(ModelConfig::preset(
        Preset::Mlp,
        features.clone(),
        Task::Regression,
        4,
    ))?))?;
    let mut layers: Vec<Layer> = mlp.branches()[0].layers.clone();
    layers.extend(mlp.head().iter().cloned().map(|mut l| {
        if let Layer::Dense(d) = &mut l {
            d.segments = None;
        }
        l
    }));
    let mut rng = RngStream::new(8);
    let x = ok(rng.normal_tensor(vec![12, mlp.config().features.numeric_width()], 0.0, 1.0))?;
    let mut h = x.clone();
    for layer in &layers {
        h = ok(layer.forward(&h, LayerMode::Infer, &mut rng))?.0;
    }
    ensure!(
        ok(mlp.predict(&[x]))? == h,
        "single-branch model differs from the plain layer stack"
    );
    Ok("widths add up for all presets; permuted branches bit-identical over 5 batches; MLP parity exact".into())
}

// ---------------------------------------------------------------------------
// pipeline fixtures

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn pipeline_fixtures() -> Outcome {
    let raw = ok(load_dataset(fixtures().join("table1")))?;
    let row = &raw.attributes[0];
    let got = (
        row.formation_thickness(),
        row.median_depth(),
        row.perforation_thickness,
        row.perforation_count,
    );
    ensure!(
        got == (96.1, 2355.95, 15.9, 5),
        "formation row parsed as {got:?}"
    );

    let raw = ok(load_dataset(fixtures().join("table2")))?;
    let expect = [
        ("W1", "2056.1", "2058.8", 2.7, 2, 20.0),
        ("W2", "1669.2", "1676.5", 4.0, 4, 105.0),
        ("W3", "1665.8", "1997.5", 3.7, 3, 5.0),
    ];
    ensure!(
        raw.attributes.len() == 3,
        "expected 3 wells, got {}",
        raw.attributes.len()
    );
    for (r, (well, top, base, thick, count, prod)) in raw.attributes.iter().zip(expect) {
        let depth = |s: &str| s.parse::<Depth>().map_err(|e| e.to_string());
        let exact = r.well_id == well
            && r.top == depth(top)?
            && r.base == depth(base)?
            && r.perforation_thickness.to_bits() == f64::to_bits(thick)
            && r.perforation_count == count
            && r.production.map(f64::to_bits) == Some(f64::to_bits(prod));
        ensure!(exact, "{well} parsed as {r:?}");
    }
    Ok("thickness 96.1, median 2355.95, perforation 15.9 m x5; W1/W2/W3 rows and 20/105/5 t/d exact".into())
}

// ---------------------------------------------------------------------------
// preprocessing invariants

fn random_segment(rng: &mut RngStream) -> Segment {
    let n = 2 + rng.below(40);
    let mut depth = 1000.0;
    let mut depths = Vec::new();
    let mut samples = Vec::new();
    for _ in 0..n {
        depths.push(depth);
        depth += rng.uniform_range(0.05, 3.0);
        samples.push(std::array::from_fn(|_| rng.normal(0.0, 100.0)));
    }
    Segment { depths, samples }
}

fn random_dataset(rng: &mut RngStream) -> Result<MixedDataset, String> {
    let (m, width, len) = (2 + rng.below(40), 1 + rng.below(6), 1 + rng.below(8));
    ok(MixedDataset::new(
        (0..m)
            .map(|i| InstanceKey {
                well_id: format!("W{i}"),
                formation_id: "F1".into(),
            })
            .collect(),
        (0..width).map(|i| format!("f{i}")).collect(),
        (0..m * width).map(|_| rng.normal(50.0, 30.0)).collect(),
        len,
        (0..m * CURVE_CHANNELS * len)
            .map(|_| rng.normal(-5.0, 12.0))
            .collect(),
        Some((0..m).map(|_| rng.uniform_range(0.0, 400.0)).collect()),
    ))
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (
        mean,
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt(),
    )
}

fn preprocessing_invariants() -> Outcome {
    let mut rng = RngStream::new(99);
    let trials = 200;
    for _ in 0..trials {
        let seg = random_segment(&mut rng);
        let length = 2 + rng.below(100);
        let r = ok(resample_segment(&seg, length))?;
        let last = seg.samples.len() - 1;
        for c in 0..CURVE_CHANNELS {
            ensure!(
                r.data()[c * length] == seg.samples[0][c],
                "first endpoint moved"
            );
            ensure!(
                r.data()[c * length + length - 1] == seg.samples[last][c],
                "last endpoint moved"
            );
        }

        let n = seg.samples.len();
        let uniform = Segment {
            depths: (0..n).map(|i| 2000.0 + 0.5 * i as f64).collect(),
            samples: seg.samples.clone(),
        };
        let r = ok(resample_segment(&uniform, n))?;
        for (i, s) in seg.samples.iter().enumerate() {
            for c in 0..CURVE_CHANNELS {
                ensure!(
                    (r.data()[c * n + i] - s[c]).abs() < 1e-12 * s[c].abs().max(1.0),
                    "identity resample drifted"
                );
            }
        }

        let vocab: Vec<String> = (0..1 + rng.below(10)).map(|i| format!("v{i}")).collect();
        let hot = ok(one_hot_encode(&vocab[rng.below(vocab.len())], &vocab))?;
        ensure!(
            hot.sum_all() == 1.0 && hot.data().iter().filter(|&&v| v == 1.0).count() == 1,
            "one-hot {hot:?}"
        );

        let data = random_dataset(&mut rng)?;
        let norm = ok(Normalizer::fit(&data))?;
        let z = ok(norm.apply(&data))?;
        for f in 0..data.numeric_width() {
            let col: Vec<f64> = (0..z.len()).map(|i| z.numeric_row(i)[f]).collect();
            let (m, s) = mean_std(&col);
            ensure!(
                m.abs() < 1e-10 && (s - 1.0).abs() < 1e-10,
                "feature {f}: mean {m:e}, std {s}"
            );
        }
        let len = z.curve_length();
        for c in 0..CURVE_CHANNELS {
            let pooled: Vec<f64> = (0..z.len())
                .flat_map(|i| z.curve_row(i)[c * len..(c + 1) * len].to_vec())
                .collect();
            let (m, s) = mean_std(&pooled);
            ensure!(
                m.abs() < 1e-10 && (s - 1.0).abs() < 1e-10,
                "curve channel {c}: mean {m:e}, std {s}"
            );
        }
        for (&y, &zy) in data
            .labels()
            .unwrap_or(&[])
            .iter()
            .zip(z.labels().unwrap_or(&[]))
        {
            ensure!(
                (norm.denormalize_label(zy) - y).abs() < 1e-10,
                "label {y} came back as {}",
                norm.denormalize_label(zy)
            );
        }
    }
    Ok(format!("{trials} random trials: endpoints exact, identity within 1e-12, one-hot sums to 1, z-scores 0/1 within 1e-10, labels round-trip"))
}

// ---------------------------------------------------------------------------
// benchmark ordering

fn benchmark() -> Outcome {
    let start = Instant::now();
    let raw = ok(synth_wells(&SynthConfig::default()))?;
    let seed = SynthConfig::default().seed;
    let mut scores = Vec::new();
    for preset in [Preset::Hdnn, Preset::Cnn, Preset::Mlp] {
        let config = ok(ModelConfig::preset(
            preset,
            FeatureSpec::default(),
            Task::Regression,
            seed,
        ))?;
        let data = ok(build_dataset(&raw, &config.features))?;
        let (train_set, test_set) = ok(split_dataset(&data, 0.8, seed))?;
        let spec = TrainSpec {
            seed,
            ..TrainSpec::default()
        };
        let trained = ok(train(ok(HybridModel::build(config))?, &train_set, &spec))?;
        scores.push(ok(evaluate(&trained.model, &test_set))?.r_squared);
    }
    let (hdnn, cnn, mlp) = (scores[0], scores[1], scores[2]);
    let elapsed = start.elapsed();
    let detail = format!(
        "{} wells, test r2 hdnn={hdnn:.4} cnn={cnn:.4} mlp={mlp:.4}, margin {:.4}, {:.0}s",
        raw.curves.len(),
        hdnn - mlp,
        elapsed.as_secs_f64()
    );
    ensure!(hdnn >= cnn && cnn >= mlp, "ordering violated: {detail}");
    ensure!(hdnn - mlp >= 0.15, "margin below 0.15: {detail}");
    ensure!(hdnn >= 0.6, "hdnn r2 below 0.6: {detail}");
    ensure!(elapsed < Duration::from_secs(15 * 60), "too slow: {detail}");
    Ok(detail)
}

// ---------------------------------------------------------------------------
// determinism and end-to-end CLI

fn hdnn_bin(args: &[&str], cwd: &Path) -> Result<String, String> {
    let out = ok(Command::new(env!("CARGO_BIN_EXE_hdnn"))
        .args(args)
        .current_dir(cwd)
        .output())?;
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    ensure!(
        out.status.code() == Some(0),
        "`hdnn {}` exited with {:?}: {}",
        args.join(" "),
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(stdout)
}

fn read(path: impl AsRef<Path>) -> Result<Vec<u8>, String> {
    ok(std::fs::read(path))
}

fn determinism() -> Outcome {
    let dir = ok(tempfile::tempdir())?;
    let d = dir.path();
    for run in ["a", "b"] {
        hdnn_bin(
            &[
                "synth",
                "--wells",
                "30",
                "--seed",
                "5",
                "--out",
                &format!("data_{run}"),
            ],
            d,
        )?;
        hdnn_bin(
            &[
                "train",
                "--data",
                &format!("data_{run}"),
                "--out",
                &format!("{run}.hdnn"),
                "--seed",
                "3",
                "--epochs",
                "8",
            ],
            d,
        )?;
    }
    for file in ["attributes.csv", "curves.csv"] {
        ensure!(
            read(d.join("data_a").join(file))? == read(d.join("data_b").join(file))?,
            "{file} differs between runs"
        );
    }
    let bytes = read(d.join("a.hdnn"))?;
    ensure!(
        bytes == read(d.join("b.hdnn"))?,
        "checkpoints differ between runs"
    );

    let (model, opt) = ok(decode_checkpoint(&bytes))?;
    ensure!(
        ok(encode_checkpoint(&model, opt.as_ref()))? == bytes,
        "re-encoding changed the checkpoint"
    );
    let raw = ok(load_dataset(d.join("data_a")))?;
    let data = ok(build_dataset(&raw, &model.config().features))?;
    let (again, _) = ok(decode_checkpoint(&bytes))?;
    let p: Vec<u64> = ok(predict_values(&model, &data))?
        .iter()
        .map(|v| v.to_bits())
        .collect();
    let q: Vec<u64> = ok(predict_values(&again, &data))?
        .iter()
        .map(|v| v.to_bits())
        .collect();
    ensure!(p == q, "reloaded predictions differ");
    Ok(format!(
        "datasets and {}-byte checkpoints identical; {} reloaded predictions bit-identical",
        bytes.len(),
        p.len()
    ))
}

fn end_to_end() -> Outcome {
    let dir = ok(tempfile::tempdir())?;
    let d = dir.path();
    hdnn_bin(
        &["synth", "--wells", "40", "--seed", "11", "--out", "data"],
        d,
    )?;
    hdnn_bin(
        &[
            "train",
            "--data",
            "data",
            "--out",
            "model.hdnn",
            "--epochs",
            "10",
        ],
        d,
    )?;
    let line = hdnn_bin(
        &[
            "evaluate",
            "--model",
            "model.hdnn",
            "--data",
            "data",
            "--split",
            "test",
        ],
        d,
    )?;
    let metrics = hdnn_cli::parse_metrics(line.trim())
        .ok_or_else(|| format!("unparsable metrics line `{line}`"))?;

    let mut raw = ok(load_dataset(d.join("data")))?;
    raw.attributes.iter_mut().for_each(|r| r.production = None);
    ok(std::fs::create_dir(d.join("new")))?;
    ok(write_attributes(d.join("new/attributes.csv"), &raw))?;
    ok(std::fs::copy(
        d.join("data/curves.csv"),
        d.join("new/curves.csv"),
    ))?;
    hdnn_bin(
        &[
            "predict",
            "--model",
            "model.hdnn",
            "--data",
            "new",
            "--out",
            "predictions.csv",
        ],
        d,
    )?;
    let rows = ok(PredictionSet::read_csv(d.join("predictions.csv")))?;
    ensure!(
        rows.len() == raw.attributes.len(),
        "{} rows for {} instances",
        rows.len(),
        raw.attributes.len()
    );
    ensure!(
        rows.rows
            .iter()
            .all(|r| r.measured.is_none() && r.predicted.is_finite()),
        "unexpected prediction rows"
    );
    Ok(format!(
        "exit 0 at every step, test r2={:.3} on {} rows, {} prediction rows",
        metrics.r_squared,
        metrics.count,
        rows.len()
    ))
}

// ---------------------------------------------------------------------------

fn main() {
    let skip_benchmark = std::env::var_os("HDNN_ACCEPTANCE_SKIP_BENCHMARK").is_some();
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gradient fidelity", gradient_fidelity),
        ("kernel oracles", kernel_oracles),
        ("closed-form oracles", closed_form_oracles),
        ("equation-structure invariants", equation_structure),
        ("pipeline fixtures", pipeline_fixtures),
        ("preprocessing invariants", preprocessing_invariants),
        ("benchmark ordering", benchmark),
        ("determinism", determinism),
        ("end-to-end cli", end_to_end),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        if skip_benchmark && name == "benchmark ordering" {
            println!("SKIP {name}");
            continue;
        }
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria failed",
        failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
