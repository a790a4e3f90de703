//! Error-detection AUC sweeps, Gaussian predictive distributions, and the
//! multi-split benchmark runner.

mod benchmark;

pub use benchmark::{
    benchmark_run, BenchmarkReport, BenchmarkSource, BenchmarkSpec, MeanWithSe, MethodSummary,
    SplitOutcome, SplitRecord, SplitReport,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::AuditError;
use crate::data::DataError;
use crate::model::ModelError;
use crate::train::TrainError;
use crate::Real;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("AUC needs both classes present")]
    SingleClass,
    #[error("scores and labels have different lengths ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("input is empty")]
    EmptyInput,
    #[error("threshold sweep needs K >= 2, got {0}")]
    BadThresholdCount(usize),
    #[error("absolute errors are (numerically) constant; no threshold range to sweep")]
    DegenerateErrors,
    #[error("predictive variance must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("uncertainty score used as a variance must be >= 0, got {0}")]
    NegativeScoreVariance(f64),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Rank-based AUC with midrank tie handling: the probability that a random
/// positive outscores a random negative, ties counting one half.
pub fn auc<F: Real>(scores: &[F], labels: &[bool]) -> Result<F, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| scores[i].partial_cmp(&scores[j]).expect("finite scores"));

    // Midranks: tied scores share the average of their 1-based positions.
    let mut rank_sum_pos = F::zero();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = F::from_usize(i + j + 2).unwrap() / F::from_f64(2.0).unwrap();
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }

    let np = F::from_usize(n_pos).unwrap();
    let nn = F::from_usize(n_neg).unwrap();
    let u = rank_sum_pos - np * (np + F::one()) / F::from_f64(2.0).unwrap();
    Ok(u / (np * nn))
}

/// Linear-interpolation percentile of a nonempty slice (q in [0, 1]).
pub fn percentile<F: Real>(values: &[F], q: f64) -> F {
    debug_assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = F::from_f64(pos - lo as f64).unwrap();
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// AUC values per threshold, `None` where only one class is present.
pub type AucCurve<F> = Vec<Option<F>>;

/// Per-method AUC as a function of the error tolerance τ. Thresholds where
/// every test point lands in one class carry no AUC (undefined ROC) and are
/// excluded from aggregates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(
    serialize = "F: Serialize",
    deserialize = "F: serde::de::DeserializeOwned"
))]
pub struct DetectionResult<F> {
    pub split_id: usize,
    pub thresholds: Vec<F>,
    pub auc_by_method: BTreeMap<String, AucCurve<F>>,
}

impl<F: Real> DetectionResult<F> {
    /// Mean AUC over defined thresholds for one method.
    pub fn mean_auc(&self, method: &str) -> Option<F> {
        let aucs = self.auc_by_method.get(method)?;
        let defined: Vec<F> = aucs.iter().filter_map(|a| *a).collect();
        if defined.is_empty() {
            return None;
        }
        Some(defined.iter().copied().sum::<F>() / F::from_usize(defined.len()).unwrap())
    }

    /// AUC at the median threshold (lower middle index).
    pub fn auc_at_median_threshold(&self, method: &str) -> Option<F> {
        let aucs = self.auc_by_method.get(method)?;
        aucs[(aucs.len() - 1) / 2]
    }
}

/// Sweep K evenly spaced tolerances between the 5th and 95th percentiles of
/// the absolute errors; at each τ, a prediction is incorrect iff its error
/// exceeds τ, and every method's scores are ranked against those labels.
pub fn detection_sweep<F: Real>(
    abs_errors: &[F],
    scores_by_method: &BTreeMap<String, Vec<F>>,
    threshold_count: usize,
    split_id: usize,
) -> Result<DetectionResult<F>, EvalError> {
    if abs_errors.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if threshold_count < 2 {
        return Err(EvalError::BadThresholdCount(threshold_count));
    }
    for scores in scores_by_method.values() {
        if scores.len() != abs_errors.len() {
            return Err(EvalError::LengthMismatch {
                scores: scores.len(),
                labels: abs_errors.len(),
            });
        }
    }
    let lo = percentile(abs_errors, 0.05);
    let hi = percentile(abs_errors, 0.95);
    if !(hi > lo) {
        return Err(EvalError::DegenerateErrors);
    }
    let kf = F::from_usize(threshold_count - 1).unwrap();
    let thresholds: Vec<F> = (0..threshold_count)
        .map(|k| lo + (hi - lo) * F::from_usize(k).unwrap() / kf)
        .collect();

    let mut auc_by_method: BTreeMap<String, AucCurve<F>> = BTreeMap::new();
    for (method, scores) in scores_by_method {
        let mut curve = Vec::with_capacity(threshold_count);
        for &tau in &thresholds {
            let labels: Vec<bool> = abs_errors.iter().map(|&e| e > tau).collect();
            let value = match auc(scores, &labels) {
                Ok(v) => Some(v),
                Err(EvalError::SingleClass) => None,
                Err(e) => return Err(e),
            };
            curve.push(value);
        }
        auc_by_method.insert(method.clone(), curve);
    }
    Ok(DetectionResult {
        split_id,
        thresholds,
        auc_by_method,
    })
}

/// Gaussian predictive distribution for one test point, in whatever target
/// units its mean and variance are expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveGaussian<F> {
    pub mean: F,
    pub variance: F,
}

impl<F: Real> PredictiveGaussian<F> {
    /// Change of variable from standardized target units to original units:
    /// the mean is unscaled and shifted, the variance picks up std².
    pub fn to_original_units(&self, stats: &crate::data::StandardizationStats<F>) -> Self {
        PredictiveGaussian {
            mean: stats.target_to_original(self.mean),
            variance: self.variance * stats.target_variance_scale(),
        }
    }

    /// Central interval half-width for the given standard-normal quantile
    /// (e.g. 1.6448536269514722 for a 90% interval).
    pub fn interval_half_width(&self, z: F) -> F {
        z * self.variance.sqrt()
    }
}

/// Predictive distribution N(mean, σ̂²(x) + ν̂²).
pub fn make_predictive<F: Real>(
    mean: F,
    score_variance: F,
    residual_variance: F,
) -> Result<PredictiveGaussian<F>, EvalError> {
    if score_variance < F::zero() {
        return Err(EvalError::NegativeScoreVariance(
            score_variance.to_f64().unwrap_or(f64::NAN),
        ));
    }
    Ok(PredictiveGaussian {
        mean,
        variance: score_variance + residual_variance,
    })
}

/// ½log(2πv) + (y − mean)²/(2v). Rejects non-positive variance.
pub fn predictive_nll<F: Real>(pred: &PredictiveGaussian<F>, y: F) -> Result<F, EvalError> {
    if !(pred.variance > F::zero()) {
        return Err(EvalError::NonPositiveVariance(
            pred.variance.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let two = F::from_f64(2.0).unwrap();
    let two_pi = F::from_f64(std::f64::consts::TAU).unwrap();
    let half = F::from_f64(0.5).unwrap();
    let r = y - pred.mean;
    Ok(half * (two_pi * pred.variance).ln() + r * r / (two * pred.variance))
}
