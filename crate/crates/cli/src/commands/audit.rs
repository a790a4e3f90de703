//! `rue audit`: build the audit context from a model artifact and its
//! training data, score every test point with one method, and write a
//! scores CSV.

use std::path::PathBuf;

use clap::Args;
use rue_core::audit::{
    build_audit_context, score_method, AuditContext, LambdaPolicy, Method, ScoreOptions,
};
use rue_core::data::{load_csv, Dataset, TargetSelector};
use rue_core::train::ModelArtifact;

use crate::csvio::{write_scores, ScoreRow};
use crate::error::CliError;
use crate::manifest::RunManifest;

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Model artifact written by `rue train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Training data the model was fit on (original units, same schema).
    #[arg(long, required_unless_present = "context")]
    pub train_data: Option<PathBuf>,
    /// Reuse a previously dumped audit context instead of rebuilding it.
    /// Methods that need training data (rue-approx, kde) still require
    /// --train-data.
    #[arg(long)]
    pub context: Option<PathBuf>,
    /// Test data to score (original units, same schema as training data).
    #[arg(long)]
    pub data: PathBuf,
    /// Target column: name, index, or 'last'.
    #[arg(long, default_value = "last")]
    pub target: String,
    /// First row of the data files is a header.
    #[arg(long)]
    pub header: bool,

    /// Scoring method.
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[arg(long, default_value_t = 100)]
    pub ensemble_size: usize,
    /// Step size for the bootstrap-sgd baseline.
    #[arg(long, default_value_t = 0.001)]
    pub sgd_step: f64,
    /// Center the bootstrap-sgd update at w − w₀ instead of the literal w.
    #[arg(long)]
    pub sgd_centered: bool,
    #[arg(long, default_value_t = 5)]
    pub kde_folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output scores CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a truth CSV (test_index, |y − ŷ| in original units) for
    /// `rue detect`.
    #[arg(long)]
    pub out_truth: Option<PathBuf>,
    /// Also dump the audit context (binary) for reuse.
    #[arg(long)]
    pub dump_context: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| {
        format!(
            "unknown method '{s}' (expected one of {})",
            Method::ALL.map(|m| m.name()).join(", ")
        )
    })
}

#[derive(serde::Serialize)]
struct ResolvedAuditConfig {
    model: String,
    train_data: Option<String>,
    context: Option<String>,
    data: String,
    target: String,
    header: bool,
    method: String,
    ensemble_size: usize,
    sgd_step: f64,
    sgd_centered: bool,
    kde_folds: usize,
}

pub fn run(args: &AuditArgs) -> Result<(), CliError> {
    let artifact = ModelArtifact::<f64>::load(&args.model)?;
    let model = artifact.to_model()?;
    let stats = &artifact.standardization;
    let selector = TargetSelector::parse(&args.target);

    let load_standardized = |path: &PathBuf| -> Result<Dataset<f64>, CliError> {
        let loaded = load_csv::<f64>(path, &selector, args.header)?;
        if loaded.dropped_rows > 0 {
            eprintln!(
                "warning: dropped {} unparseable rows from {}",
                loaded.dropped_rows,
                path.display()
            );
        }
        Ok(stats.transform(&loaded.dataset)?)
    };

    let train_std = args
        .train_data
        .as_ref()
        .map(load_standardized)
        .transpose()?;

    let ctx: AuditContext<f64> = match (&args.context, &train_std) {
        (Some(path), _) => AuditContext::read_binary(path)?,
        (None, Some(train)) => {
            build_audit_context(&model, train, LambdaPolicy::MinEigenvalueAtLeast(1.0))?
        }
        (None, None) => {
            return Err(CliError::input(
                "either --train-data or --context is required",
            ))
        }
    };
    if ctx.dim() != model.theta_hat.len() {
        return Err(CliError::input(format!(
            "context dimension {} does not match the model artifact ({})",
            ctx.dim(),
            model.theta_hat.len()
        )));
    }

    // Methods that smooth over the training set need the actual rows.
    let needs_train = matches!(args.method, Method::RueApprox | Method::Kde);
    let train_ref: Dataset<f64> = match (&train_std, needs_train) {
        (Some(t), _) => t.clone(),
        (None, false) => Dataset::empty(ctx.arch().input_dim()),
        (None, true) => {
            return Err(CliError::input(format!(
                "--method {} needs --train-data",
                args.method
            )))
        }
    };

    let test_std = load_standardized(&args.data)?;
    let opts = ScoreOptions {
        ensemble_size: args.ensemble_size,
        sgd_step: args.sgd_step,
        sgd_centered: args.sgd_centered,
        kde_folds: args.kde_folds,
        ..ScoreOptions::default()
    };
    let scores = score_method(
        args.method,
        &ctx,
        &train_ref,
        test_std.inputs(),
        &opts,
        args.seed,
    )?;
    let base = ctx.base_predictions(test_std.inputs())?;

    let rows: Vec<ScoreRow> = scores
        .iter()
        .zip(&base)
        .enumerate()
        .map(|(i, (&score, &pred))| ScoreRow {
            test_index: i,
            method: args.method.name().to_string(),
            score,
            base_prediction: stats.target_to_original(pred),
        })
        .collect();
    write_scores(&args.out, &rows)?;

    if let Some(path) = &args.out_truth {
        // Test targets are stored standardized; undo for original-unit errors.
        let abs_errors: Vec<f64> = base
            .iter()
            .zip(test_std.targets())
            .map(|(&f_std, &y_std)| {
                (stats.target_to_original(f_std) - stats.target_to_original(y_std)).abs()
            })
            .collect();
        crate::csvio::write_truth(path, &abs_errors)?;
    }

    if let Some(path) = &args.dump_context {
        ctx.write_binary(path)?;
        eprintln!("dumped audit context to {}", path.display());
    }

    let mut manifest = RunManifest::new(
        "audit",
        args.seed,
        ResolvedAuditConfig {
            model: args.model.display().to_string(),
            train_data: args.train_data.as_ref().map(|p| p.display().to_string()),
            context: args.context.as_ref().map(|p| p.display().to_string()),
            data: args.data.display().to_string(),
            target: args.target.clone(),
            header: args.header,
            method: args.method.name().to_string(),
            ensemble_size: args.ensemble_size,
            sgd_step: args.sgd_step,
            sgd_centered: args.sgd_centered,
            kde_folds: args.kde_folds,
        },
    )?
    .with_dataset(&args.data)?;
    manifest.add_output(&args.out);
    manifest.write_beside(&args.out)?;

    eprintln!(
        "scored {} test points with {} (λ = {})",
        rows.len(),
        args.method,
        ctx.lambda()
    );
    Ok(())
}
