//! Command-line workflows over the `hdnn` library: generate synthetic data,
//! train, evaluate, predict and run the gradient checks.

pub mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use hdnn::data::{
    build_dataset, load_dataset, split_dataset, synth_generate, MixedDataset, SynthConfig,
};
use hdnn::network::{load_checkpoint, save_checkpoint, HybridModel};
use hdnn::train::{evaluate, predict, train, Trained};
use hdnn::Metrics;

pub use config::{default_config, parse_config, parse_config_str, CliConfig, DataOptions};

#[derive(Debug, Parser)]
#[command(
    name = "hdnn",
    version,
    about = "Hybrid deep neural network for well productivity"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic well block (attributes.csv, curves.csv).
    Synth {
        #[arg(long, default_value_t = 180)]
        wells: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write a checkpoint plus history.csv beside it.
    Train {
        /// TOML config; defaults to the hdnn preset.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Data directory; overrides `data.dir` from the config.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Seed for initialization and training.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Where to write the training curves [default: history.csv next to --out].
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Print `mse=… mae=… r2=… n=…` for a labelled data set.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Write predictions in t/d for every formation.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Run the finite-difference gradient checks.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    All,
    Train,
    Test,
}

/// Selects the part of a data set that `train` trained on or held out.
#[derive(Debug, clap::Args)]
pub struct SplitArgs {
    #[arg(long, value_enum, default_value_t = Split::All)]
    pub split: Split,
    /// Must match `data.test_fraction` used for training.
    #[arg(long, default_value_t = config::DEFAULT_TEST_FRACTION)]
    pub test_fraction: f64,
    /// Must match `data.split_seed` used for training.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
}

type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

fn create_parent(path: &Path) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| format!("{}: {e}", parent.display()))?;
    }
    Ok(())
}

/// The printed metrics line: nine significant digits in scientific notation.
pub fn format_metrics(m: &Metrics) -> String {
    format!(
        "mse={:.8e} mae={:.8e} r2={:.8e} n={}",
        m.mse, m.mae, m.r_squared, m.count
    )
}

/// Parses a line produced by [`format_metrics`].
pub fn parse_metrics(line: &str) -> Option<Metrics> {
    let mut m = Metrics {
        mse: f64::NAN,
        mae: f64::NAN,
        r_squared: f64::NAN,
        count: 0,
    };
    for field in line.split_whitespace() {
        let (key, value) = field.split_once('=')?;
        match key {
            "mse" => m.mse = value.parse().ok()?,
            "mae" => m.mae = value.parse().ok()?,
            "r2" => m.r_squared = value.parse().ok()?,
            "n" => m.count = value.parse().ok()?,
            _ => return None,
        }
    }
    Some(m)
}

/// `train`/`test` portions of a data set, as `train` splits them.
pub fn holdout_split(
    data: &MixedDataset,
    test_fraction: f64,
    seed: u64,
) -> hdnn::Result<(MixedDataset, MixedDataset)> {
    if test_fraction == 0.0 {
        return Ok((data.clone(), data.subset(&[])?));
    }
    split_dataset(data, 1.0 - test_fraction, seed)
}

fn load_for_model(model: &HybridModel, dir: &Path, split: &SplitArgs) -> CliResult<MixedDataset> {
    let raw = load_dataset(dir)?;
    let data = build_dataset(&raw, &model.config().features)?;
    if !(0.0..1.0).contains(&split.test_fraction) {
        return Err(format!(
            "--test-fraction must be in [0, 1), got {}",
            split.test_fraction
        )
        .into());
    }
    let (train_part, test_part) = holdout_split(&data, split.test_fraction, split.split_seed)?;
    Ok(match split.split {
        Split::All => data,
        Split::Train => train_part,
        Split::Test => test_part,
    })
}

fn run_command(command: Command) -> CliResult<bool> {
    match command {
        Command::Synth { wells, seed, out } => {
            let config = SynthConfig {
                wells,
                seed,
                ..SynthConfig::default()
            };
            let data = synth_generate(&config, &out)?;
            println!(
                "wrote {} wells, {} formations to {}",
                data.curves.len(),
                data.attributes.len(),
                out.display()
            );
        }
        Command::Train {
            config,
            data,
            out,
            seed,
            epochs,
            batch,
            lr,
            history: history_out,
        } => {
            let mut cfg = match &config {
                Some(path) => parse_config(path)?,
                None => default_config(),
            };
            if let Some(s) = seed {
                cfg.model.seed = s;
                cfg.train.seed = s;
            }
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if let Some(b) = batch {
                cfg.train.batch_size = b;
            }
            if let Some(r) = lr {
                cfg.train.learning_rate = r;
            }
            cfg.train.validate()?;
            let dir = data
                .or(cfg.data.dir.clone())
                .ok_or("no data directory: pass --data or set data.dir in the config")?;
            let raw = load_dataset(&dir)?;
            let dataset = build_dataset(&raw, &cfg.model.features)?;
            let (train_part, _) =
                holdout_split(&dataset, cfg.data.test_fraction, cfg.data.split_seed)?;
            let model = HybridModel::build(cfg.model.clone())?;
            let parameters = model.count_parameters();
            let Trained {
                model,
                history,
                optimizer,
            } = train(model, &train_part, &cfg.train)?;
            create_parent(&out)?;
            save_checkpoint(&model, Some(&optimizer), &out)?;
            let history_path = history_out.unwrap_or_else(|| out.with_file_name("history.csv"));
            history.write_csv(&history_path)?;
            println!(
                "trained {parameters} parameters on {} formations for {} epochs (kept epoch {}); wrote {} and {}",
                train_part.len(),
                history.len(),
                history.best_epoch.unwrap_or(history.len()),
                out.display(),
                history_path.display()
            );
        }
        Command::Evaluate { model, data, split } => {
            let (model, _) = load_checkpoint(&model)?;
            let dataset = load_for_model(&model, &data, &split)?;
            println!("{}", format_metrics(&evaluate(&model, &dataset)?));
        }
        Command::Predict {
            model,
            data,
            out,
            split,
        } => {
            let (model, _) = load_checkpoint(&model)?;
            let dataset = load_for_model(&model, &data, &split)?;
            let predictions = predict(&model, &dataset)?;
            create_parent(&out)?;
            predictions.write_csv(&out)?;
            println!(
                "wrote {} predictions to {}",
                predictions.len(),
                out.display()
            );
        }
        Command::Gradcheck { seed } => {
            let report = hdnn::gradcheck::run_suite(seed);
            println!("{report}");
            return Ok(report.all_passed());
        }
    }
    Ok(true)
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 1 on a runtime or data error (or a failing gradient check), 2 on a usage
/// error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run_command(cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
