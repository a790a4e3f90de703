//! `rue train`: fit one model on a dataset (or a synthetic task) and write
//! the model artifact plus a run manifest.

use std::path::PathBuf;

use clap::Args;
use rue_core::data::{
    load_csv, simulate_extrapolation_task, simulate_saturating_exp, standardize, Dataset,
    TargetSelector,
};
use rue_core::model::Architecture;
use rue_core::train::{train, ModelArtifact, TrainConfig};

use crate::commands::{SimulateParams, SyntheticTask};
use crate::error::CliError;
use crate::manifest::RunManifest;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training data as delimited text (original units).
    #[arg(long, conflicts_with = "simulate")]
    pub data: Option<PathBuf>,
    /// Generate training data from a synthetic task instead.
    #[arg(long, value_enum)]
    pub simulate: Option<SyntheticTask>,
    #[command(flatten)]
    pub sim: SimulateParams,
    /// Sample count when simulating.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Where to write the simulated training data.
    #[arg(long)]
    pub out_data: Option<PathBuf>,

    /// Target column: name, index, or 'last'.
    #[arg(long, default_value = "last")]
    pub target: String,
    /// First row of the data file is a header.
    #[arg(long)]
    pub header: bool,

    /// Hidden layer width (ignored with --linear).
    #[arg(long, default_value_t = 50)]
    pub hidden: usize,
    /// Fit the degenerate linear architecture instead of the MLP.
    #[arg(long)]
    pub linear: bool,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub weight_decay: f64,
    /// Exclude bias parameters from weight decay.
    #[arg(long)]
    pub no_regularize_biases: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output model artifact (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(serde::Serialize)]
struct ResolvedTrainConfig<'a> {
    data: Option<String>,
    simulate: Option<String>,
    sim: &'a SimulateParams,
    n: usize,
    target: &'a str,
    header: bool,
    hidden: usize,
    linear: bool,
    train: TrainConfig<f64>,
}

pub fn run(args: &TrainArgs) -> Result<(), CliError> {
    let config = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        learning_rate: args.learning_rate,
        weight_decay: args.weight_decay,
        regularize_biases: !args.no_regularize_biases,
        seed: args.seed,
        ..TrainConfig::default()
    };

    let raw: Dataset<f64> = match (&args.data, args.simulate) {
        (Some(path), None) => {
            let loaded = load_csv(path, &TargetSelector::parse(&args.target), args.header)?;
            if loaded.dropped_rows > 0 {
                eprintln!(
                    "warning: dropped {} unparseable rows from {}",
                    loaded.dropped_rows,
                    path.display()
                );
            }
            loaded.dataset
        }
        (None, Some(task)) => {
            let params = args.sim.to_params();
            match task {
                SyntheticTask::SaturatingExp => simulate_saturating_exp(&params, args.n, args.seed),
                SyntheticTask::Extrapolation => {
                    simulate_extrapolation_task(&params, args.n, args.n, args.seed).train
                }
            }
        }
        _ => {
            return Err(CliError::input(
                "exactly one of --data or --simulate is required",
            ))
        }
    };

    // Standardization statistics are fit on the provided training data.
    let placeholder = raw.clone();
    let (train_std, _, stats) = standardize(&raw, &placeholder)?;
    if !stats.dropped_columns.is_empty() {
        eprintln!(
            "warning: dropped constant input columns {:?}",
            stats.dropped_columns
        );
    }

    let arch = if args.linear {
        Architecture::linear(train_std.p())?
    } else {
        Architecture::mlp(train_std.p(), args.hidden)?
    };
    let model = train(&arch, &train_std, &config)?;
    let artifact = ModelArtifact::from_model(&model, &stats);
    artifact.save(&args.out)?;

    let mut manifest = RunManifest::new(
        "train",
        args.seed,
        ResolvedTrainConfig {
            data: args.data.as_ref().map(|p| p.display().to_string()),
            simulate: args.simulate.map(|t| format!("{t:?}")),
            sim: &args.sim,
            n: args.n,
            target: &args.target,
            header: args.header,
            hidden: args.hidden,
            linear: args.linear,
            train: config,
        },
    )?;
    if let Some(path) = &args.data {
        manifest = manifest.with_dataset(path)?;
    }
    manifest.add_output(&args.out);

    // Simulated runs write their training data so a later audit can rebuild
    // the context from the same rows.
    if args.simulate.is_some() {
        let out_data = args
            .out_data
            .clone()
            .unwrap_or_else(|| default_data_path(&args.out));
        write_dataset_csv(&out_data, &raw)?;
        manifest.add_output(&out_data);
        eprintln!("wrote simulated training data to {}", out_data.display());
    }
    manifest.write_beside(&args.out)?;

    eprintln!(
        "trained {} parameters, final objective {:.6}, residual variance {:.6}",
        model.theta_hat.len(),
        model.loss_trace.last().copied().unwrap_or(f64::NAN),
        model.residual_variance
    );
    Ok(())
}

fn default_data_path(out: &std::path::Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".train-data.csv");
    out.with_file_name(name)
}

pub fn write_dataset_csv(path: &std::path::Path, data: &Dataset<f64>) -> Result<(), CliError> {
    let mut text = String::new();
    for i in 0..data.n() {
        for v in data.input_row(i) {
            text.push_str(&format!("{v},"));
        }
        text.push_str(&format!("{}\n", data.target(i)));
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}
