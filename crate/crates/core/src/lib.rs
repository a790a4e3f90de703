//! Post-hoc reliability auditing for trained regression models.
//!
//! Given a model fit by minimizing a summed loss plus regularizer, this crate
//! scores the pointwise reliability of its predictions without retraining:
//! the resampling score perturbs the fitted parameters with a one-step
//! Newton correction toward bootstrap-reweighted data and measures how much
//! each prediction moves. Baseline scores (Laplace sampling, kernel density,
//! single-gradient-step bootstrap) and an evaluation harness for
//! error-detection AUC sweeps and Gaussian predictive likelihoods are
//! included.
//!
//! All numeric code is generic over the scalar type through [`Real`];
//! concrete `f64` aliases for the main types live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

pub mod audit;
pub mod data;
pub mod eval;
pub mod linalg;
pub mod model;
pub mod seeding;
pub mod train;

/// Scalar type for all numeric routines: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Display + Debug + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

pub use audit::{AuditContext, EnsemblePredictions, LambdaPolicy, Method, ScoreOptions};
pub use data::{Dataset, SplitSpec, StandardizationStats};
pub use eval::{BenchmarkReport, DetectionResult, PredictiveGaussian};
pub use linalg::{EigenDecomposition, Mat, SymmetricMatrix, WeightVector};
pub use model::{Architecture, LossGradientMatrix, ParamVector, PredictionGradient};
pub use train::{TrainConfig, TrainedModel};

/// `f64` specializations used by the CLI and the benchmark harness.
pub type Mat64 = Mat<f64>;
pub type SymmetricMatrix64 = SymmetricMatrix<f64>;
pub type Dataset64 = Dataset<f64>;
pub type ParamVector64 = ParamVector<f64>;
pub type TrainConfig64 = TrainConfig<f64>;
pub type TrainedModel64 = TrainedModel<f64>;
pub type AuditContext64 = AuditContext<f64>;
pub type EnsemblePredictions64 = EnsemblePredictions<f64>;
pub type DetectionResult64 = DetectionResult<f64>;
pub type BenchmarkReport64 = BenchmarkReport<f64>;
