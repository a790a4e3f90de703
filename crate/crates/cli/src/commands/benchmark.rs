//! `rue benchmark`: the full per-split pipeline over a dataset (or the
//! synthetic extrapolation task), emitting a JSON report plus flat CSVs of
//! the AUC curves and mean likelihoods.

use std::path::{Path, PathBuf};

use clap::Args;
use rue_core::audit::{LambdaPolicy, ScoreOptions};
use rue_core::data::{load_csv, load_manifest, SplitSpec, TargetSelector};
use rue_core::eval::{
    benchmark_run, BenchmarkReport, BenchmarkSource, BenchmarkSpec, SplitOutcome,
};
use rue_core::train::TrainConfig;

use crate::commands::{parse_methods, SimulateParams, SyntheticTask};
use crate::error::CliError;
use crate::manifest::RunManifest;

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Dataset as delimited text.
    #[arg(long, conflicts_with_all = ["manifest", "simulate"])]
    pub data: Option<PathBuf>,
    /// Dataset name used in reports (with --data; defaults to the stem).
    #[arg(long)]
    pub name: Option<String>,
    /// Target column for --data: name, index, or 'last'.
    #[arg(long, default_value = "last")]
    pub target: String,
    /// First row of --data is a header.
    #[arg(long)]
    pub header: bool,

    /// Dataset manifest file (name,path,target,n,p per line).
    #[arg(long, requires = "dataset")]
    pub manifest: Option<PathBuf>,
    /// Entry to pick from --manifest.
    #[arg(long)]
    pub dataset: Option<String>,

    /// Run the synthetic extrapolation task instead of a file.
    #[arg(long, value_enum)]
    pub simulate: Option<SyntheticTask>,
    #[command(flatten)]
    pub sim: SimulateParams,
    /// Training rows per synthetic split.
    #[arg(long, default_value_t = 200)]
    pub sim_train: usize,
    /// Test rows per synthetic split.
    #[arg(long, default_value_t = 300)]
    pub sim_test: usize,

    #[arg(long, default_value_t = 20)]
    pub splits: usize,
    /// Fraction of rows used for training in each split.
    #[arg(long, conflicts_with = "train_count")]
    pub train_fraction: Option<f64>,
    /// Absolute training-row count in each split (e.g. 600 for large sets).
    #[arg(long)]
    pub train_count: Option<usize>,

    /// Comma-separated methods: rue,rue-approx,sandwich,laplace,bootstrap-sgd,kde,null.
    #[arg(long, default_value = "rue,laplace,kde,bootstrap-sgd")]
    pub methods: String,
    #[arg(long, default_value_t = 50)]
    pub thresholds: usize,
    #[arg(long, default_value_t = 50)]
    pub hidden: usize,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 100)]
    pub ensemble_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output directory for report.json, auc_curves.csv, nll.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn run(args: &BenchmarkArgs) -> Result<(), CliError> {
    let methods = parse_methods(&args.methods)?;
    if methods.is_empty() {
        return Err(CliError::input("--methods must name at least one method"));
    }

    let split_spec = match (args.train_fraction, args.train_count) {
        (Some(f), None) => SplitSpec::Fraction(f),
        (None, Some(c)) => SplitSpec::Count(c),
        (None, None) => SplitSpec::Fraction(0.9),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };

    let mut dataset_path: Option<PathBuf> = None;
    let source: BenchmarkSource<f64> = if let Some(task) = args.simulate {
        if task != SyntheticTask::Extrapolation {
            return Err(CliError::input(
                "benchmark --simulate supports the extrapolation task",
            ));
        }
        BenchmarkSource::Extrapolation {
            name: "extrapolation".to_string(),
            params: args.sim.to_params(),
            n_train: args.sim_train,
            n_test: args.sim_test,
        }
    } else if let Some(manifest_path) = &args.manifest {
        let entries = load_manifest(manifest_path)?;
        let name = args.dataset.as_deref().expect("clap requires");
        let entry = entries
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| CliError::input(format!("manifest has no entry '{name}'")))?;
        let loaded = load_csv::<f64>(&entry.path, &TargetSelector::parse(&entry.target), false)?;
        if loaded.dataset.n() != entry.expected_n || loaded.dataset.p() != entry.expected_p {
            return Err(CliError::input(format!(
                "{name}: expected {}×{} from the manifest, loaded {}×{}",
                entry.expected_n,
                entry.expected_p,
                loaded.dataset.n(),
                loaded.dataset.p()
            )));
        }
        dataset_path = Some(PathBuf::from(&entry.path));
        BenchmarkSource::Table {
            name: name.to_string(),
            data: loaded.dataset,
            split: split_spec,
        }
    } else if let Some(path) = &args.data {
        let loaded = load_csv::<f64>(path, &TargetSelector::parse(&args.target), args.header)?;
        if loaded.dropped_rows > 0 {
            eprintln!("warning: dropped {} unparseable rows", loaded.dropped_rows);
        }
        dataset_path = Some(path.clone());
        let name = args.name.clone().unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".to_string())
        });
        BenchmarkSource::Table {
            name,
            data: loaded.dataset,
            split: split_spec,
        }
    } else {
        return Err(CliError::input(
            "one of --data, --manifest/--dataset, or --simulate is required",
        ));
    };

    let spec = BenchmarkSpec {
        n_splits: args.splits,
        hidden_width: args.hidden,
        train_config: TrainConfig {
            epochs: args.epochs,
            ..TrainConfig::default()
        },
        methods,
        score_options: ScoreOptions {
            ensemble_size: args.ensemble_size,
            ..ScoreOptions::default()
        },
        threshold_count: args.thresholds,
        lambda_policy: LambdaPolicy::MinEigenvalueAtLeast(1.0),
        master_seed: args.seed,
    };

    let report = benchmark_run(&source, &spec);
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", args.out_dir.display())))?;

    let report_path = args.out_dir.join("report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", report_path.display())))?;
    let curves_path = args.out_dir.join("auc_curves.csv");
    write_curves(&curves_path, &report)?;
    let nll_path = args.out_dir.join("nll.csv");
    write_nll(&nll_path, &report)?;

    let mut manifest = RunManifest::new("benchmark", args.seed, &spec)?;
    if let Some(path) = &dataset_path {
        manifest = manifest.with_dataset(path)?;
    }
    manifest.add_output(&report_path);
    manifest.add_output(&curves_path);
    manifest.add_output(&nll_path);
    manifest.write_beside(&report_path)?;

    let ok = report.successful_splits().count();
    eprintln!("{ok}/{} splits succeeded", report.splits.len());
    for record in &report.splits {
        if let SplitOutcome::Failed { error } = &record.outcome {
            eprintln!("  split {} failed: {error}", record.split_id);
        }
    }
    for method in report.spec.methods.clone() {
        if let Some(auc) = report.auc_summary(method.name()) {
            match report.nll_summary(method.name()) {
                Some(nll) => eprintln!(
                    "{}: mean AUC {:.4} ± {:.4}, mean NLL {:.4} ± {:.4}",
                    method.name(),
                    auc.mean,
                    auc.se,
                    nll.mean,
                    nll.se
                ),
                None => eprintln!(
                    "{}: mean AUC {:.4} ± {:.4}",
                    method.name(),
                    auc.mean,
                    auc.se
                ),
            }
        }
    }
    Ok(())
}

fn write_curves(path: &Path, report: &BenchmarkReport<f64>) -> Result<(), CliError> {
    let mut out = String::from("dataset,split,method,tau,auc\n");
    for (record, split) in report.successful_splits() {
        for (method, curve) in &split.detection.auc_by_method {
            for (tau, auc) in split.detection.thresholds.iter().zip(curve) {
                match auc {
                    Some(a) => out.push_str(&format!(
                        "{},{},{method},{tau},{a}\n",
                        report.dataset, record.split_id
                    )),
                    None => out.push_str(&format!(
                        "{},{},{method},{tau},\n",
                        report.dataset, record.split_id
                    )),
                }
            }
        }
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn write_nll(path: &Path, report: &BenchmarkReport<f64>) -> Result<(), CliError> {
    let mut out = String::from("dataset,split,method,mean_nll\n");
    for (record, split) in report.successful_splits() {
        for (method, nll) in &split.mean_nll {
            out.push_str(&format!(
                "{},{},{method},{nll}\n",
                report.dataset, record.split_id
            ));
        }
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}
