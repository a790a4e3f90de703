//! Multi-split benchmark runner: split → standardize → train → audit with
//! every requested method → detection sweep and predictive likelihoods.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::audit::{build_audit_context, score_method, LambdaPolicy, Method, ScoreOptions};
use crate::data::{
    simulate_extrapolation_task, split, standardize, Dataset, SaturatingExpParams, SplitSpec,
};
use crate::eval::{detection_sweep, make_predictive, predictive_nll, DetectionResult, EvalError};
use crate::model::Architecture;
use crate::seeding::derive_seed;
use crate::train::{train, TrainConfig};
use crate::Real;

/// Where each split's train/test pair comes from.
#[derive(Debug, Clone)]
pub enum BenchmarkSource<F> {
    /// A fixed table resampled into seeded train/test splits.
    Table {
        name: String,
        data: Dataset<F>,
        split: SplitSpec,
    },
    /// Fresh synthetic extrapolation data per split.
    Extrapolation {
        name: String,
        params: SaturatingExpParams<F>,
        n_train: usize,
        n_test: usize,
    },
}

impl<F: Real> BenchmarkSource<F> {
    pub fn name(&self) -> &str {
        match self {
            BenchmarkSource::Table { name, .. } => name,
            BenchmarkSource::Extrapolation { name, .. } => name,
        }
    }

    fn split_data(&self, seed: u64) -> Result<(Dataset<F>, Dataset<F>), EvalError> {
        match self {
            BenchmarkSource::Table {
                data, split: spec, ..
            } => Ok(split(data, *spec, seed)?),
            BenchmarkSource::Extrapolation {
                params,
                n_train,
                n_test,
                ..
            } => {
                let task = simulate_extrapolation_task(params, *n_train, *n_test, seed);
                Ok((task.train, task.test))
            }
        }
    }
}

/// Everything a benchmark run depends on besides the data source.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(
    serialize = "F: Serialize",
    deserialize = "F: serde::de::DeserializeOwned"
))]
pub struct BenchmarkSpec<F> {
    pub n_splits: usize,
    pub hidden_width: usize,
    pub train_config: TrainConfig<F>,
    pub methods: Vec<Method>,
    pub score_options: ScoreOptions<F>,
    pub threshold_count: usize,
    pub lambda_policy: LambdaPolicy<F>,
    pub master_seed: u64,
}

impl<F: Real> Default for BenchmarkSpec<F> {
    fn default() -> Self {
        BenchmarkSpec {
            n_splits: 20,
            hidden_width: 50,
            train_config: TrainConfig::default(),
            methods: vec![
                Method::Rue,
                Method::Laplace,
                Method::Kde,
                Method::BootstrapSgd,
            ],
            score_options: ScoreOptions::default(),
            threshold_count: 50,
            lambda_policy: LambdaPolicy::MinEigenvalueAtLeast(F::one()),
            master_seed: 0,
        }
    }
}

/// Result of one successful split.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(
    serialize = "F: Serialize",
    deserialize = "F: serde::de::DeserializeOwned"
))]
pub struct SplitReport<F> {
    pub n_train: usize,
    pub n_test: usize,
    pub detection: DetectionResult<F>,
    /// Mean predictive NLL in original target units, for the methods whose
    /// scores are variances.
    pub mean_nll: BTreeMap<String, F>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(
    tag = "status",
    rename_all = "snake_case",
    bound(
        serialize = "F: Serialize",
        deserialize = "F: serde::de::DeserializeOwned"
    )
)]
pub enum SplitOutcome<F> {
    Ok(SplitReport<F>),
    Failed { error: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(
    serialize = "F: Serialize",
    deserialize = "F: serde::de::DeserializeOwned"
))]
pub struct SplitRecord<F> {
    pub split_id: usize,
    pub seed: u64,
    pub outcome: SplitOutcome<F>,
}

/// Mean and standard error of a per-split statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanWithSe<F> {
    pub mean: F,
    /// Standard error of the mean across splits (0 for a single split).
    pub se: F,
    pub splits: usize,
}

fn mean_with_se<F: Real>(values: &[F]) -> Option<MeanWithSe<F>> {
    if values.is_empty() {
        return None;
    }
    let n = F::from_usize(values.len()).unwrap();
    let mean = values.iter().copied().sum::<F>() / n;
    let se = if values.len() < 2 {
        F::zero()
    } else {
        let var = values.iter().map(|v| (*v - mean) * (*v - mean)).sum::<F>()
            / (n - F::one());
        (var / n).sqrt()
    };
    Some(MeanWithSe {
        mean,
        se,
        splits: values.len(),
    })
}

/// Per-method cross-split aggregates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(
    serialize = "F: Serialize",
    deserialize = "F: serde::de::DeserializeOwned"
))]
pub struct MethodSummary<F> {
    pub auc: Option<MeanWithSe<F>>,
    pub nll: Option<MeanWithSe<F>>,
}

/// Aggregate report: the configuration snapshot, one record per split, and
/// cross-split mean/standard-error summaries per method.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(
    serialize = "F: Serialize",
    deserialize = "F: serde::de::DeserializeOwned"
))]
pub struct BenchmarkReport<F> {
    pub dataset: String,
    pub master_seed: u64,
    pub spec: BenchmarkSpec<F>,
    pub splits: Vec<SplitRecord<F>>,
    pub summary: BTreeMap<String, MethodSummary<F>>,
}

impl<F: Real> BenchmarkReport<F> {
    pub fn successful_splits(&self) -> impl Iterator<Item = (&SplitRecord<F>, &SplitReport<F>)> {
        self.splits
            .iter()
            .filter_map(|record| match &record.outcome {
                SplitOutcome::Ok(report) => Some((record, report)),
                SplitOutcome::Failed { .. } => None,
            })
    }

    /// Mean and standard error over splits of the per-split mean AUC.
    pub fn auc_summary(&self, method: &str) -> Option<MeanWithSe<F>> {
        let values: Vec<F> = self
            .successful_splits()
            .filter_map(|(_, report)| report.detection.mean_auc(method))
            .collect();
        mean_with_se(&values)
    }

    /// Mean over splits of the per-split mean AUC for one method.
    pub fn mean_auc(&self, method: &str) -> Option<F> {
        self.auc_summary(method).map(|s| s.mean)
    }

    /// Mean over splits of the AUC at the median threshold.
    pub fn mean_auc_at_median_threshold(&self, method: &str) -> Option<F> {
        let values: Vec<F> = self
            .successful_splits()
            .filter_map(|(_, report)| report.detection.auc_at_median_threshold(method))
            .collect();
        mean_with_se(&values).map(|s| s.mean)
    }

    /// Mean and standard error over splits of the per-split mean NLL.
    pub fn nll_summary(&self, method: &str) -> Option<MeanWithSe<F>> {
        let values: Vec<F> = self
            .successful_splits()
            .filter_map(|(_, report)| report.mean_nll.get(method).copied())
            .collect();
        mean_with_se(&values)
    }

    /// Mean over splits of the per-split mean NLL.
    pub fn mean_nll(&self, method: &str) -> Option<F> {
        self.nll_summary(method).map(|s| s.mean)
    }
}

fn run_split<F: Real>(
    source: &BenchmarkSource<F>,
    spec: &BenchmarkSpec<F>,
    split_seed: u64,
) -> Result<SplitReport<F>, EvalError> {
    let (train_raw, test_raw) = source.split_data(split_seed)?;
    let (train_std, test_std, stats) = standardize(&train_raw, &test_raw)?;

    let arch = Architecture::mlp(train_std.p(), spec.hidden_width)?;
    let config = TrainConfig {
        seed: split_seed,
        ..spec.train_config
    };
    let model = train(&arch, &train_std, &config)?;
    let ctx = build_audit_context(&model, &train_std, spec.lambda_policy)?;

    // Base predictions and absolute errors in original target units.
    let preds_std = ctx.base_predictions(test_std.inputs())?;
    let abs_errors: Vec<F> = preds_std
        .iter()
        .zip(test_raw.targets())
        .map(|(&f_std, &y)| (stats.target_to_original(f_std) - y).abs())
        .collect();

    let mut scores_by_method = BTreeMap::new();
    let mut mean_nll = BTreeMap::new();
    for (mi, &method) in spec.methods.iter().enumerate() {
        let method_seed = derive_seed(split_seed, 100 + mi as u64);
        let scores = score_method(
            method,
            &ctx,
            &train_std,
            test_std.inputs(),
            &spec.score_options,
            method_seed,
        )?;
        if method.is_variance_based() {
            let mut total = F::zero();
            for ((&score, &mean_std), &y) in scores.iter().zip(&preds_std).zip(test_raw.targets()) {
                let predictive = make_predictive(mean_std, score, model.residual_variance)?
                    .to_original_units(&stats);
                total += predictive_nll(&predictive, y)?;
            }
            mean_nll.insert(
                method.name().to_string(),
                total / F::from_usize(test_raw.n()).unwrap(),
            );
        }
        scores_by_method.insert(method.name().to_string(), scores);
    }

    let detection = detection_sweep(&abs_errors, &scores_by_method, spec.threshold_count, 0)?;
    Ok(SplitReport {
        n_train: train_std.n(),
        n_test: test_std.n(),
        detection,
        mean_nll,
    })
}

/// Run every split; per-split failures are recorded without aborting the
/// remaining splits.
pub fn benchmark_run<F: Real>(
    source: &BenchmarkSource<F>,
    spec: &BenchmarkSpec<F>,
) -> BenchmarkReport<F> {
    let mut splits = Vec::with_capacity(spec.n_splits);
    for split_id in 0..spec.n_splits {
        let seed = derive_seed(spec.master_seed, split_id as u64);
        let outcome = match run_split(source, spec, seed) {
            Ok(mut report) => {
                report.detection.split_id = split_id;
                SplitOutcome::Ok(report)
            }
            Err(e) => SplitOutcome::Failed {
                error: e.to_string(),
            },
        };
        splits.push(SplitRecord {
            split_id,
            seed,
            outcome,
        });
    }
    let mut report = BenchmarkReport {
        dataset: source.name().to_string(),
        master_seed: spec.master_seed,
        spec: spec.clone(),
        splits,
        summary: BTreeMap::new(),
    };
    report.summary = report
        .spec
        .methods
        .iter()
        .map(|m| {
            let name = m.name().to_string();
            let summary = MethodSummary {
                auc: report.auc_summary(&name),
                nll: report.nll_summary(&name),
            };
            (name, summary)
        })
        .collect();
    report
}
