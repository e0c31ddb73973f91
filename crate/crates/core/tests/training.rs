use hdnn::data::{InstanceKey, MixedDataset, Normalizer, CURVE_CHANNELS};
use hdnn::metrics::Metrics;
use hdnn::network::{
    BranchKind, BranchSpec, FeatureSpec, HeadSpec, HybridModel, LayerSpec, ModelConfig, Task,
};
use hdnn::rng::RngStream;
use hdnn::train::{evaluate, predict, predict_values, train, PredictionSet, TrainSpec};

const CURVE_LEN: usize = 4;
const COEFFS: [f64; 4] = [1.5, -2.0, 0.5, 3.0];

fn linear_dataset(m: usize, seed: u64) -> MixedDataset {
    let mut rng = RngStream::new(seed);
    let mut numeric = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..m {
        let x: Vec<f64> = (0..4).map(|_| rng.normal(0.0, 1.0)).collect();
        labels.push(10.0 + x.iter().zip(COEFFS).map(|(a, b)| a * b).sum::<f64>());
        numeric.extend(x);
    }
    let curves: Vec<f64> = (0..m * CURVE_CHANNELS * CURVE_LEN)
        .map(|_| rng.normal(0.0, 1.0))
        .collect();
    MixedDataset::new(
        (0..m)
            .map(|i| InstanceKey {
                well_id: format!("W{:03}", i / 2),
                formation_id: format!("F{}", i % 2 + 1),
            })
            .collect(),
        (0..4).map(|i| format!("x{i}")).collect(),
        numeric,
        CURVE_LEN,
        curves,
        Some(labels),
    )
    .unwrap()
}

fn features() -> FeatureSpec {
    FeatureSpec {
        resample_length: CURVE_LEN,
        ..FeatureSpec::default()
    }
}

fn mlp(seed: u64) -> HybridModel {
    let config = ModelConfig::from_branches(
        vec![hdnn::network::stock_numeric_branch(&features())],
        Task::Regression,
        features(),
        seed,
    )
    .unwrap();
    HybridModel::build(config).unwrap()
}

#[test]
fn linear_target_is_learned() {
    let data = linear_dataset(200, 1);
    let mut model = mlp(2);
    model.set_normalizer(Some(Normalizer::fit(&data).unwrap()));
    let initial = evaluate(&model, &data).unwrap().mse;
    let spec = TrainSpec {
        epochs: 200,
        validation_fraction: 0.0,
        patience: None,
        seed: 3,
        ..TrainSpec::default()
    };
    let trained = train(model, &data, &spec).unwrap();
    assert_eq!(trained.history.len(), 200);
    let last = trained.history.epochs.last().unwrap().train_loss;
    let first = trained.history.epochs[0].train_loss;
    let final_mse = evaluate(&trained.model, &data).unwrap().mse;
    assert!(final_mse < 0.01 * initial, "{final_mse} vs {initial}");
    assert!(last < first);
}

#[test]
fn zero_epochs_change_nothing() {
    let data = linear_dataset(20, 1);
    let fresh = mlp(4);
    let spec = TrainSpec {
        epochs: 0,
        ..TrainSpec::default()
    };
    let trained = train(fresh.clone(), &data, &spec).unwrap();
    assert!(trained.history.is_empty());
    let bits = |m: &HybridModel| {
        m.parameters()
            .iter()
            .flat_map(|(_, t)| t.data().iter().map(|v| v.to_bits()))
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&trained.model), bits(&fresh));
    assert_eq!(trained.optimizer.step, 0);
}

#[test]
fn full_batch_epoch_is_one_step() {
    let data = linear_dataset(24, 1);
    let spec = TrainSpec {
        epochs: 1,
        batch_size: 24,
        validation_fraction: 0.0,
        patience: None,
        ..TrainSpec::default()
    };
    assert_eq!(train(mlp(0), &data, &spec).unwrap().optimizer.step, 1);
    let spec = TrainSpec { epochs: 3, ..spec };
    let trained = train(mlp(0), &data, &spec).unwrap();
    assert_eq!((trained.optimizer.step, trained.history.len()), (3, 3));
}

#[test]
fn early_stopping_keeps_the_best_epoch() {
    let data = linear_dataset(60, 5);
    let spec = TrainSpec {
        epochs: 40,
        patience: Some(3),
        seed: 1,
        ..TrainSpec::default()
    };
    let trained = train(mlp(1), &data, &spec).unwrap();
    let best = trained.history.best_epoch.unwrap();
    let losses: Vec<f64> = trained
        .history
        .epochs
        .iter()
        .map(|e| e.val_loss.unwrap())
        .collect();
    let min = losses.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(losses[best - 1], min);
    assert!(trained.history.len() <= 40);
    assert!(trained.history.epochs.iter().all(|e| e.val_mae.is_some()));
}

#[test]
fn labels_are_required() {
    let data = linear_dataset(10, 1).without_labels();
    assert!(train(mlp(0), &data, &TrainSpec::default()).is_err());
    assert!(
        evaluate(&mlp(0), &linear_dataset(10, 1)).is_err(),
        "no normalizer yet"
    );
}

// Bare linear head with identity normalization: prediction = w·x + b.
fn rigged(weights: [f64; 4], bias: f64) -> HybridModel {
    let mut model = HybridModel::build(ModelConfig {
        branches: vec![BranchSpec {
            name: "numeric".into(),
            kind: BranchKind::NumericMlp,
            input: vec![4],
            layers: vec![],
        }],
        head: HeadSpec {
            task: Task::Regression,
            input_width: 4,
            layers: vec![LayerSpec::Dense { units: 1 }],
        },
        seed: 0,
        features: features(),
    })
    .unwrap();
    for (name, t) in model.parameters_mut() {
        match name.as_str() {
            "head.0.weight" => t.data_mut().copy_from_slice(&weights),
            _ => t.data_mut()[0] = bias,
        }
    }
    model.set_normalizer(Some(Normalizer {
        numeric_mean: vec![0.0; 4],
        numeric_std: vec![1.0; 4],
        curve_mean: vec![0.0; CURVE_CHANNELS],
        curve_std: vec![1.0; CURVE_CHANNELS],
        label_mean: 0.0,
        label_std: 1.0,
        std_floor: 1e-8,
    }));
    model
}

#[test]
fn perfect_and_constant_predictors() {
    let data = linear_dataset(30, 9);
    let perfect = rigged(COEFFS, 10.0);
    let m = evaluate(&perfect, &data).unwrap();
    assert!((m.r_squared - 1.0).abs() < 1e-12 && m.mse < 1e-20 && m.mae < 1e-10);
    for (p, y) in predict_values(&perfect, &data)
        .unwrap()
        .iter()
        .zip(data.labels().unwrap())
    {
        assert!((p - y).abs() < 1e-10);
    }
    let constant = rigged([0.0; 4], 7.0);
    assert_eq!(evaluate(&constant, &data).unwrap().r_squared, 0.0);
}

#[test]
fn metrics_match_the_prediction_rows() {
    let data = linear_dataset(40, 2);
    let spec = TrainSpec {
        epochs: 5,
        ..TrainSpec::default()
    };
    let model = train(mlp(3), &data, &spec).unwrap().model;
    let m = evaluate(&model, &data).unwrap();
    let rows = predict(&model, &data).unwrap();
    assert_eq!(rows.len(), data.len());
    let (pred, target): (Vec<f64>, Vec<f64>) = rows
        .rows
        .iter()
        .map(|r| (r.predicted, r.measured.unwrap()))
        .unzip();
    let n = pred.len() as f64;
    let mse = pred
        .iter()
        .zip(&target)
        .map(|(p, y)| (p - y) * (p - y))
        .sum::<f64>()
        / n;
    let mae = pred
        .iter()
        .zip(&target)
        .map(|(p, y)| (p - y).abs())
        .sum::<f64>()
        / n;
    let (mp, my) = (pred.iter().sum::<f64>() / n, target.iter().sum::<f64>() / n);
    let cov: f64 = pred
        .iter()
        .zip(&target)
        .map(|(p, y)| (p - mp) * (y - my))
        .sum();
    let vp: f64 = pred.iter().map(|p| (p - mp) * (p - mp)).sum();
    let vy: f64 = target.iter().map(|y| (y - my) * (y - my)).sum();
    let r2 = cov * cov / (vp * vy);
    assert!((m.mse - mse).abs() < 1e-10 * mse.max(1.0));
    assert!((m.mae - mae).abs() < 1e-10);
    assert!((m.r_squared - r2).abs() < 1e-10);
    assert_eq!(
        rows.metrics().unwrap(),
        Metrics::compute(&pred, &target).unwrap()
    );

    // repeat inference is bit-identical
    assert_eq!(predict(&model, &data).unwrap(), rows);
    for (row, key) in rows.rows.iter().zip(data.keys()) {
        assert_eq!(
            (&row.well_id, &row.formation_id),
            (&key.well_id, &key.formation_id)
        );
    }
}

#[test]
fn prediction_csv_round_trip() {
    let data = linear_dataset(25, 4);
    let model = rigged([0.1, 0.2, 0.3, 1.0 / 3.0], -0.7);
    let dir = tempfile::tempdir().unwrap();
    for set in [data.clone(), data.without_labels()] {
        let rows: PredictionSet = predict(&model, &set).unwrap();
        let path = dir.path().join("p.csv");
        rows.write_csv(&path).unwrap();
        let back = PredictionSet::read_csv(&path).unwrap();
        assert_eq!(back, rows);
        let bits = |s: &PredictionSet| {
            s.rows
                .iter()
                .map(|r| r.predicted.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&back), bits(&rows));
    }
}

#[test]
fn classifier_trains_on_class_indices() {
    let mut data = linear_dataset(40, 3);
    let labels: Vec<f64> = data
        .labels()
        .unwrap()
        .iter()
        .map(|&y| if y > 10.0 { 1.0 } else { 0.0 })
        .collect();
    data = MixedDataset::new(
        data.keys().to_vec(),
        data.feature_names().to_vec(),
        (0..data.len())
            .flat_map(|i| data.numeric_row(i).to_vec())
            .collect(),
        CURVE_LEN,
        (0..data.len())
            .flat_map(|i| data.curve_row(i).to_vec())
            .collect(),
        Some(labels),
    )
    .unwrap();
    let config = ModelConfig::from_branches(
        vec![hdnn::network::stock_numeric_branch(&features())],
        Task::Classification { classes: 2 },
        features(),
        0,
    )
    .unwrap();
    let spec = TrainSpec {
        epochs: 30,
        ..TrainSpec::default()
    };
    let trained = train(HybridModel::build(config).unwrap(), &data, &spec).unwrap();
    let losses: Vec<f64> = trained
        .history
        .epochs
        .iter()
        .map(|e| e.train_loss)
        .collect();
    assert!(losses.last().unwrap() < &losses[0]);
    assert!(
        evaluate(&trained.model, &data).is_err(),
        "classifiers have no production metrics"
    );
}
