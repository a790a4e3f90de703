//! `rue detect`: sweep error tolerances and rank every method's scores
//! against the correct/incorrect labels.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use rue_core::eval::detection_sweep;

use crate::csvio::{read_scores, read_truth};
use crate::error::CliError;
use crate::manifest::RunManifest;

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Scores CSV from `rue audit`; repeat for several methods.
    #[arg(long = "scores", required = true)]
    pub scores: Vec<PathBuf>,
    /// Truth CSV with columns test_index,abs_error (original units).
    #[arg(long)]
    pub truth: PathBuf,
    /// Number of evenly spaced tolerances between the 5th and 95th error
    /// percentiles.
    #[arg(long, default_value_t = 50)]
    pub thresholds: usize,
    /// Output CSV with columns method,tau,auc (auc empty when undefined).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(serde::Serialize)]
struct ResolvedDetectConfig {
    scores: Vec<String>,
    truth: String,
    thresholds: usize,
}

pub fn run(args: &DetectArgs) -> Result<(), CliError> {
    let abs_errors = read_truth(&args.truth)?;

    let mut scores_by_method: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for path in &args.scores {
        let rows = read_scores(path)?;
        if rows.len() != abs_errors.len() {
            return Err(CliError::input(format!(
                "{} has {} rows but the truth file has {}",
                path.display(),
                rows.len(),
                abs_errors.len()
            )));
        }
        // A single file may carry several methods; group by name.
        let mut by_method: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
        for row in rows {
            by_method
                .entry(row.method.clone())
                .or_default()
                .push((row.test_index, row.score));
        }
        for (method, mut indexed) in by_method {
            indexed.sort_by_key(|(i, _)| *i);
            if indexed.len() != abs_errors.len() {
                return Err(CliError::input(format!(
                    "method '{method}' in {} has {} rows but the truth file has {}",
                    path.display(),
                    indexed.len(),
                    abs_errors.len()
                )));
            }
            scores_by_method.insert(method, indexed.into_iter().map(|(_, s)| s).collect());
        }
    }

    let result = detection_sweep(&abs_errors, &scores_by_method, args.thresholds, 0)?;

    let mut out = String::from("method,tau,auc\n");
    for (method, curve) in &result.auc_by_method {
        for (tau, auc) in result.thresholds.iter().zip(curve) {
            match auc {
                Some(a) => out.push_str(&format!("{method},{tau},{a}\n")),
                None => out.push_str(&format!("{method},{tau},\n")),
            }
        }
    }
    std::fs::write(&args.out, out)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", args.out.display())))?;

    let mut manifest = RunManifest::new(
        "detect",
        0,
        ResolvedDetectConfig {
            scores: args
                .scores
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
            truth: args.truth.display().to_string(),
            thresholds: args.thresholds,
        },
    )?;
    manifest.add_output(&args.out);
    manifest.write_beside(&args.out)?;

    for method in scores_by_method.keys() {
        if let Some(mean) = result.mean_auc(method) {
            eprintln!("{method}: mean AUC {mean:.4} over defined tolerances");
        }
    }
    Ok(())
}
