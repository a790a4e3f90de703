//! Deterministic, seeded minibatch training.
//!
//! The loop is single-threaded and fully determined by (architecture, data,
//! config): initialization draws from one seeded stream, epoch shuffles from
//! another. No convergence is assumed or required anywhere downstream; the
//! audit works from whatever parameters training ends at.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, StandardizationStats};
use crate::model::{self, Architecture, ModelError, ParamVector, Penalty};
use crate::seeding::{stream_rng, STREAM_INIT, STREAM_SHUFFLE};
use crate::Real;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training aborted: non-finite objective at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("training data is empty")]
    EmptyData,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot access model artifact {path}: {source}")]
    ArtifactIo {
        path: String,
        source: std::io::Error,
    },
    #[error("model artifact is not valid JSON: {0}")]
    ArtifactFormat(#[from] serde_json::Error),
    #[error("model artifact has format version {actual}, this tool reads {expected}")]
    ArtifactVersion { expected: u32, actual: u32 },
    #[error("model artifact uses parameter layout '{actual}', this tool uses '{expected}'")]
    ArtifactLayout { expected: String, actual: String },
}

/// Training hyperparameters. Defaults are the fixed configuration used by
/// the benchmark harness: 500 epochs, minibatches of 128, Adam with
/// b₁ = 0.9, b₂ = 0.999 at a fixed learning rate of 0.001, weight decay
/// α = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig<F> {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: F,
    pub adam_beta1: F,
    pub adam_beta2: F,
    pub adam_epsilon: F,
    pub weight_decay: F,
    pub regularize_biases: bool,
    pub seed: u64,
}

impl<F: Real> Default for TrainConfig<F> {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            batch_size: 128,
            learning_rate: F::from_f64(0.001).unwrap(),
            adam_beta1: F::from_f64(0.9).unwrap(),
            adam_beta2: F::from_f64(0.999).unwrap(),
            adam_epsilon: F::from_f64(1e-8).unwrap(),
            weight_decay: F::one(),
            regularize_biases: true,
            seed: 0,
        }
    }
}

impl<F: Real> TrainConfig<F> {
    pub fn penalty(&self) -> Penalty<F> {
        Penalty {
            alpha: self.weight_decay,
            regularize_biases: self.regularize_biases,
        }
    }
}

/// Adam first/second moment state with bias correction.
#[derive(Debug, Clone)]
pub struct AdamState<F> {
    m: Vec<F>,
    v: Vec<F>,
    t: u64,
}

impl<F: Real> AdamState<F> {
    pub fn new(dim: usize) -> Self {
        AdamState {
            m: vec![F::zero(); dim],
            v: vec![F::zero(); dim],
            t: 0,
        }
    }

    /// One update:
    ///   m ← β₁m + (1−β₁)g, v ← β₂v + (1−β₂)g²,
    ///   θ ← θ − lr·m̂/(√v̂ + ε) with m̂ = m/(1−β₁ᵗ), v̂ = v/(1−β₂ᵗ).
    pub fn step(&mut self, theta: &mut [F], grad: &[F], config: &TrainConfig<F>) {
        assert_eq!(theta.len(), grad.len());
        assert_eq!(theta.len(), self.m.len());
        self.t += 1;
        let b1 = config.adam_beta1;
        let b2 = config.adam_beta2;
        let t_i32 = self.t.min(i32::MAX as u64) as i32;
        let bc1 = F::one() - b1.powi(t_i32);
        let bc2 = F::one() - b2.powi(t_i32);
        for i in 0..theta.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (F::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (F::one() - b2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_epsilon);
        }
    }
}

/// A trained model: the architecture, the parameters training ended at, the
/// configuration that produced them, the training-residual variance ν̂², and
/// the full-objective trace per epoch.
#[derive(Debug, Clone)]
pub struct TrainedModel<F> {
    pub arch: Architecture,
    pub theta_hat: ParamVector<F>,
    pub config: TrainConfig<F>,
    pub residual_variance: F,
    pub loss_trace: Vec<F>,
}

/// Seeded initialization: zero biases, fan-in-scaled uniform weights.
pub fn init_params<F: Real>(arch: &Architecture, seed: u64) -> ParamVector<F> {
    let mut rng = stream_rng(seed, STREAM_INIT);
    let mut values = vec![F::zero(); arch.param_count()];
    let mut fill = |slice: &mut [F], fan_in: usize| {
        let bound = 1.0 / (fan_in as f64).sqrt();
        for v in slice {
            let u: f64 = rng.random_range(-bound..bound);
            *v = F::from_f64(u).unwrap();
        }
    };
    match *arch {
        Architecture::Mlp {
            input_dim,
            hidden_width,
        } => {
            let (p, h) = (input_dim, hidden_width);
            let (w1, rest) = values.split_at_mut(h * p);
            fill(w1, p);
            let (_b1, rest) = rest.split_at_mut(h);
            let (w2, _b2) = rest.split_at_mut(h);
            fill(w2, h);
        }
        Architecture::Linear { input_dim } => {
            let (w, _b) = values.split_at_mut(input_dim);
            fill(w, input_dim);
        }
    }
    ParamVector::new(values).expect("initialization is finite")
}

/// Run the seeded Adam loop on the summed objective. The last partial
/// minibatch of each epoch is kept, and the per-minibatch regularizer
/// gradient is scaled by |batch|/n so one epoch sums to the full objective
/// gradient.
pub fn train<F: Real>(
    arch: &Architecture,
    data: &Dataset<F>,
    config: &TrainConfig<F>,
) -> Result<TrainedModel<F>, TrainError> {
    let n = data.n();
    if n == 0 {
        return Err(TrainError::EmptyData);
    }
    let penalty = config.penalty();
    let mut theta = init_params::<F>(arch, config.seed);
    let mut adam = AdamState::new(arch.param_count());
    let mut shuffle_rng = stream_rng(config.seed, STREAM_SHUFFLE);
    let nf = F::from_usize(n).unwrap();
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        for i in (1..n).rev() {
            let j = shuffle_rng.random_range(0..=i);
            order.swap(i, j);
        }
        for batch in order.chunks(config.batch_size.max(1)) {
            let scale = F::from_usize(batch.len()).unwrap() / nf;
            let grad = model::batch_objective_gradient(arch, &theta, data, batch, penalty, scale)?;
            adam.step(theta.as_mut_slice(), &grad, config);
        }
        let loss = model::objective(arch, &theta, data, penalty)?;
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { epoch });
        }
        loss_trace.push(loss);
    }

    let residual_variance = residual_variance(arch, &theta, data)?;
    Ok(TrainedModel {
        arch: *arch,
        theta_hat: theta,
        config: *config,
        residual_variance,
        loss_trace,
    })
}

/// ν̂² = (1/n) Σ (yᵢ − f(xᵢ, θ̂))² on the training data.
pub fn residual_variance<F: Real>(
    arch: &Architecture,
    theta: &ParamVector<F>,
    data: &Dataset<F>,
) -> Result<F, TrainError> {
    if data.n() == 0 {
        return Err(TrainError::EmptyData);
    }
    let mut acc = F::zero();
    for i in 0..data.n() {
        let f = model::forward(arch, theta, data.input_row(i))?;
        let r = data.target(i) - f;
        acc += r * r;
    }
    Ok(acc / F::from_usize(data.n()).unwrap())
}

const ARTIFACT_VERSION: u32 = 1;
const PARAM_LAYOUT: &str = "w1-rowmajor/b1/w2/b2";

/// Serialized form of a trained model: architecture, layout tag, flat
/// parameters, the training configuration, ν̂², and the standardization
/// statistics the model was trained under.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(
    serialize = "F: Serialize",
    deserialize = "F: serde::de::DeserializeOwned"
))]
pub struct ModelArtifact<F> {
    pub format_version: u32,
    pub param_layout: String,
    pub arch: Architecture,
    pub theta_hat: Vec<F>,
    pub config: TrainConfig<F>,
    pub residual_variance: F,
    pub standardization: StandardizationStats<F>,
}

impl<F: Real + Serialize + serde::de::DeserializeOwned> ModelArtifact<F> {
    pub fn from_model(model: &TrainedModel<F>, stats: &StandardizationStats<F>) -> Self {
        ModelArtifact {
            format_version: ARTIFACT_VERSION,
            param_layout: PARAM_LAYOUT.to_string(),
            arch: model.arch,
            theta_hat: model.theta_hat.as_slice().to_vec(),
            config: model.config,
            residual_variance: model.residual_variance,
            standardization: stats.clone(),
        }
    }

    pub fn to_model(&self) -> Result<TrainedModel<F>, TrainError> {
        Ok(TrainedModel {
            arch: self.arch,
            theta_hat: ParamVector::new(self.theta_hat.clone())?,
            config: self.config,
            residual_variance: self.residual_variance,
            loss_trace: Vec::new(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TrainError> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json).map_err(|source| TrainError::ArtifactIo {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TrainError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| TrainError::ArtifactIo {
            path: path.display().to_string(),
            source,
        })?;
        let artifact: ModelArtifact<F> = serde_json::from_str(&text)?;
        if artifact.format_version != ARTIFACT_VERSION {
            return Err(TrainError::ArtifactVersion {
                expected: ARTIFACT_VERSION,
                actual: artifact.format_version,
            });
        }
        if artifact.param_layout != PARAM_LAYOUT {
            return Err(TrainError::ArtifactLayout {
                expected: PARAM_LAYOUT.to_string(),
                actual: artifact.param_layout,
            });
        }
        Ok(artifact)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;

    #[test]
    fn adam_matches_hand_stepped_recurrence() {
        let config = TrainConfig::<f64> {
            learning_rate: 0.1,
            ..TrainConfig::default()
        };
        let mut adam = AdamState::new(1);
        let mut theta = [0.5f64];

        // Reference recurrence, stepped by hand.
        let (b1, b2, eps, lr): (f64, f64, f64, f64) = (0.9, 0.999, 1e-8, 0.1);
        let mut m = 0.0;
        let mut v = 0.0;
        let mut expected = 0.5;
        for t in 1..=5i32 {
            let g = 2.0 * expected; // gradient of θ²
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t));
            let v_hat = v / (1.0 - b2.powi(t));
            expected -= lr * m_hat / (v_hat.sqrt() + eps);

            let grad = [2.0 * theta[0]];
            adam.step(&mut theta, &grad, &config);
            assert!(
                (theta[0] - expected).abs() < 1e-15,
                "step {t}: {} vs {}",
                theta[0],
                expected
            );
        }
    }

    #[test]
    fn equal_seeds_give_bitwise_identical_parameters() {
        let arch = Architecture::mlp(1, 4).unwrap();
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 10.0]).collect();
        let ys: Vec<f64> = (0..20).map(|i| (i as f64 / 10.0).sin()).collect();
        let data = Dataset::from_rows(&rows, ys).unwrap();
        let config = TrainConfig {
            epochs: 30,
            seed: 5,
            ..TrainConfig::default()
        };
        let a = train(&arch, &data, &config).unwrap();
        let b = train(&arch, &data, &config).unwrap();
        assert_eq!(a.theta_hat.as_slice(), b.theta_hat.as_slice());
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn residual_variance_cases() {
        let arch = Architecture::linear(1).unwrap();
        // Perfect fit: f(x) = x on y = x.
        let theta = ParamVector::new(vec![1.0, 0.0]).unwrap();
        let data = Dataset::from_rows(&[vec![1.0], vec![2.0]], vec![1.0, 2.0]).unwrap();
        assert_eq!(residual_variance(&arch, &theta, &data).unwrap(), 0.0);

        // Constant-zero model on targets ±1 → mean square 1.
        let theta = ParamVector::new(vec![0.0, 0.0]).unwrap();
        let data = Dataset::from_rows(&[vec![1.0], vec![2.0]], vec![1.0, -1.0]).unwrap();
        assert_eq!(residual_variance(&arch, &theta, &data).unwrap(), 1.0);
    }

    #[test]
    fn residual_variance_matches_resummation() {
        let arch = Architecture::linear(2).unwrap();
        let theta = ParamVector::new(vec![0.3f64, -0.7, 0.1]).unwrap();
        let rows = vec![vec![1.0, 0.5], vec![-0.2, 1.5], vec![2.0, -1.0]];
        let ys = vec![0.4, -0.3, 1.2];
        let data = Dataset::from_rows(&rows, ys.clone()).unwrap();
        let nu2 = residual_variance(&arch, &theta, &data).unwrap();
        let mut expected = 0.0;
        for (row, y) in rows.iter().zip(&ys) {
            let f = 0.3 * row[0] - 0.7 * row[1] + 0.1;
            expected += (y - f) * (y - f);
        }
        expected /= 3.0;
        assert!((nu2 - expected).abs() < 1e-15);
    }

    #[test]
    fn artifact_round_trip_and_version_checks() {
        let arch = Architecture::mlp(1, 2).unwrap();
        let data =
            Dataset::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], vec![0.0, 1.0, 0.5]).unwrap();
        let config = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        let model = train(&arch, &data, &config).unwrap();
        let stats = StandardizationStats {
            original_p: 1,
            dropped_columns: vec![],
            input_mean: vec![0.0],
            input_std: vec![1.0],
            target_mean: 0.0,
            target_std: 1.0,
        };
        let artifact = ModelArtifact::from_model(&model, &stats);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        artifact.save(&path).unwrap();
        let loaded = ModelArtifact::<f64>::load(&path).unwrap();
        assert_eq!(loaded.theta_hat, artifact.theta_hat);
        assert_eq!(
            loaded.to_model().unwrap().theta_hat.as_slice(),
            model.theta_hat.as_slice()
        );

        // Corrupt the layout tag and expect rejection.
        let mut bad = loaded.clone();
        bad.param_layout = "other".to_string();
        let bad_path = dir.path().join("bad.json");
        bad.save(&bad_path).unwrap();
        assert!(matches!(
            ModelArtifact::<f64>::load(&bad_path),
            Err(TrainError::ArtifactLayout { .. })
        ));
    }
}
