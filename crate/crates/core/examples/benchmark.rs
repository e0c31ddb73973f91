//! Trains the three stock architectures on the default synthetic well block
//! and prints their test-set r².
//!
//! ```text
//! cargo run --release -p hdnn --example benchmark [seed]
//! ```

use std::time::Instant;

use hdnn::data::{build_dataset, split_dataset, synth_wells, SynthConfig};
use hdnn::network::{FeatureSpec, HybridModel, ModelConfig, Preset, Task};
use hdnn::train::{evaluate, train, TrainSpec};

fn main() -> hdnn::error::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .map_or(Ok(7), |s| s.parse())
        .expect("seed must be an integer");
    let raw = synth_wells(&SynthConfig {
        seed,
        ..SynthConfig::default()
    })?;
    for preset in [Preset::Hdnn, Preset::Cnn, Preset::Mlp] {
        let start = Instant::now();
        let config = ModelConfig::preset(preset, FeatureSpec::default(), Task::Regression, seed)?;
        let data = build_dataset(&raw, &config.features)?;
        let (train_set, test_set) = split_dataset(&data, 0.8, seed)?;
        let trained = train(
            HybridModel::build(config)?,
            &train_set,
            &TrainSpec {
                seed,
                ..TrainSpec::default()
            },
        )?;
        let m = evaluate(&trained.model, &test_set)?;
        println!(
            "{preset:>4}  r2={:.4}  mse={:.3}  epochs={}  best={:?}  {:.1}s",
            m.r_squared,
            m.mse,
            trained.history.len(),
            trained.history.best_epoch,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
