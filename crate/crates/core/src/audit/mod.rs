//! Resampling-based reliability auditing of a trained model.
//!
//! The audit context freezes everything the resampling update needs: the
//! fitted parameters θ̂, the per-sample loss gradient matrix L, the damped
//! Hessian H̃ = H + λI with its Cholesky factorization, and the influence
//! matrix A = H̃⁻¹L. Each ensemble member draws multinomial resampling
//! weights w and evaluates the model at θ* = θ̂ − A(w − w₀); the per-test-
//! point variance of those predictions is the uncertainty score. The
//! closed-form kernel approximation and the after-learning baselines
//! (Laplace sampling, single-step bootstrap, input-density KDE) live here
//! too so every method scores against the same context.

mod baselines;
mod persist;

pub use baselines::{
    bootstrap_sgd_ensemble, default_bandwidth_grid, kde_bandwidth_cv, kde_score, laplace_ensemble,
    laplace_score_closed,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::linalg::{
    multinomial_sample, sym_eigendecomp, CholeskyFactor, LinalgError, Mat, WeightVector,
};
use crate::model::{
    self, Architecture, LossGradientMatrix, ModelError, ParamVector, DEFAULT_HESSIAN_DIM_LIMIT,
};
use crate::seeding::{stream_rng, STREAM_NULL};
use crate::train::TrainedModel;
use crate::Real;
use rand::Rng;

/// Per-member RNG streams start here so they never collide with the named
/// role streams in [`crate::seeding`].
const ENSEMBLE_MEMBER_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("ensemble needs at least 2 members, got {0}")]
    EnsembleTooSmall(usize),
    #[error("weight vector has {actual} entries, context has {expected} training samples")]
    WeightLength { expected: usize, actual: usize },
    #[error("damped-Hessian solve residual {residual:e} exceeds tolerance; eigensolver and factorization disagree")]
    SolveResidual { residual: f64 },
    #[error("bandwidth grid is empty")]
    EmptyBandwidthGrid,
    #[error("every candidate bandwidth gave -inf held-out log density")]
    DegenerateBandwidths,
    #[error("cross validation needs 2 <= folds <= n (folds={folds}, n={n})")]
    BadFoldCount { folds: usize, n: usize },
    #[error("ensemble predictions contain non-finite values")]
    NonFiniteEnsemble,
    #[error("cannot access context dump {path}: {source}")]
    PersistIo {
        path: String,
        source: std::io::Error,
    },
    #[error("context dump is malformed: {0}")]
    PersistFormat(String),
}

/// Dampening policy for H̃ = H + λI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LambdaPolicy<F> {
    /// λ = max(0, target − λ_min(H)), so the smallest eigenvalue of H̃ is
    /// at least `target`.
    MinEigenvalueAtLeast(F),
    Fixed(F),
}

impl<F: Real> Default for LambdaPolicy<F> {
    fn default() -> Self {
        LambdaPolicy::MinEigenvalueAtLeast(F::one())
    }
}

impl<F: Real> LambdaPolicy<F> {
    pub fn lambda(&self, min_eigenvalue: F) -> F {
        match *self {
            LambdaPolicy::MinEigenvalueAtLeast(target) => (target - min_eigenvalue).max(F::zero()),
            LambdaPolicy::Fixed(lambda) => lambda,
        }
    }
}

/// Frozen post-training state shared by every scoring method.
#[derive(Debug, Clone)]
pub struct AuditContext<F> {
    arch: Architecture,
    theta_hat: ParamVector<F>,
    loss_gradients: LossGradientMatrix<F>,
    lambda: F,
    min_hessian_eigenvalue: F,
    factor: CholeskyFactor<F>,
    influence: Mat<F>, // A = H̃⁻¹ L, d×n
    n: usize,
}

/// Build the audit context: assemble H, eigendecompose it, pick λ from the
/// policy, factor H̃ = H + λI, and solve for A = H̃⁻¹L.
pub fn build_audit_context<F: Real>(
    model: &TrainedModel<F>,
    train: &Dataset<F>,
    policy: LambdaPolicy<F>,
) -> Result<AuditContext<F>, AuditError> {
    let arch = model.arch;
    let penalty = model.config.penalty();
    let loss_gradients = model::loss_gradient_matrix(&arch, &model.theta_hat, train)?;
    let hessian = model::objective_hessian(
        &arch,
        &model.theta_hat,
        train,
        penalty,
        DEFAULT_HESSIAN_DIM_LIMIT,
    )?;
    let eig = sym_eigendecomp(&hessian)?;
    let min_eig = eig.min_eigenvalue();
    let lambda = policy.lambda(min_eig);
    let damped = hessian.shifted(lambda);
    let factor = CholeskyFactor::factor(damped.as_mat())?;
    let influence = factor.solve_mat(loss_gradients.as_mat());

    let ctx = AuditContext {
        arch,
        theta_hat: model.theta_hat.clone(),
        loss_gradients,
        lambda,
        min_hessian_eigenvalue: min_eig,
        factor,
        influence,
        n: train.n(),
    };
    ctx.check_solve_residual(&damped)?;
    Ok(ctx)
}

impl<F: Real> AuditContext<F> {
    /// Probe ‖H̃(Av) − Lv‖ / ‖Lv‖ on a fixed vector; a large residual means
    /// the factorization and the dampening policy disagree.
    fn check_solve_residual(
        &self,
        damped: &crate::linalg::SymmetricMatrix<F>,
    ) -> Result<(), AuditError> {
        if self.n == 0 {
            return Ok(());
        }
        let probe: Vec<F> = (0..self.n)
            .map(|i| if i % 2 == 0 { F::one() } else { -F::one() })
            .collect();
        let av = self.influence.matvec(&probe);
        let hav = damped.as_mat().matvec(&av);
        let lv = self.loss_gradients.as_mat().matvec(&probe);
        let num = hav
            .iter()
            .zip(&lv)
            .map(|(a, b)| (*a - *b) * (*a - *b))
            .sum::<F>()
            .sqrt();
        let den = lv.iter().map(|v| *v * *v).sum::<F>().sqrt();
        // 1e-8 in double precision; scales up for narrower scalar types.
        let tol = F::from_f64(1e-8)
            .unwrap()
            .max(F::epsilon() * F::from_f64(100.0).unwrap());
        if num > tol * den.max(F::one()) {
            return Err(AuditError::SolveResidual {
                residual: (num / den.max(F::one())).to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn theta_hat(&self) -> &ParamVector<F> {
        &self.theta_hat
    }

    pub fn loss_gradients(&self) -> &LossGradientMatrix<F> {
        &self.loss_gradients
    }

    /// A = H̃⁻¹L.
    pub fn influence(&self) -> &Mat<F> {
        &self.influence
    }

    pub fn lambda(&self) -> F {
        self.lambda
    }

    pub fn min_hessian_eigenvalue(&self) -> F {
        self.min_hessian_eigenvalue
    }

    /// Smallest eigenvalue of H̃ implied by the shift.
    pub fn min_damped_eigenvalue(&self) -> F {
        self.min_hessian_eigenvalue + self.lambda
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.theta_hat.len()
    }

    /// H̃⁻¹ v through the cached factorization.
    pub fn solve_damped(&self, v: &[F]) -> Vec<F> {
        self.factor.solve_vec(v)
    }

    pub(crate) fn factor(&self) -> &CholeskyFactor<F> {
        &self.factor
    }

    /// θ* = θ̂ − A(w − w₀) for one resampling weight vector.
    pub fn resample_theta(&self, weights: &WeightVector) -> Result<ParamVector<F>, AuditError> {
        if weights.len() != self.n {
            return Err(AuditError::WeightLength {
                expected: self.n,
                actual: weights.len(),
            });
        }
        let delta = weights.delta_from_ones::<F>();
        let shift = self.influence.matvec(&delta);
        let mut theta = self.theta_hat.as_slice().to_vec();
        for (t, s) in theta.iter_mut().zip(&shift) {
            *t -= *s;
        }
        Ok(ParamVector::new(theta)?)
    }

    /// Model prediction at θ̂ for each row of `x_test`.
    pub fn base_predictions(&self, x_test: &Mat<F>) -> Result<Vec<F>, AuditError> {
        (0..x_test.rows())
            .map(|j| Ok(model::forward(&self.arch, &self.theta_hat, x_test.row(j))?))
            .collect()
    }
}

/// b×m matrix of predictions: row i holds the predictions of resampled
/// model i at every test point.
#[derive(Debug, Clone)]
pub struct EnsemblePredictions<F> {
    values: Mat<F>,
}

impl<F: Real> EnsemblePredictions<F> {
    pub fn new(values: Mat<F>) -> Result<Self, AuditError> {
        if !values.is_finite() {
            return Err(AuditError::NonFiniteEnsemble);
        }
        Ok(EnsemblePredictions { values })
    }

    pub fn ensemble_size(&self) -> usize {
        self.values.rows()
    }

    pub fn test_count(&self) -> usize {
        self.values.cols()
    }

    pub fn as_mat(&self) -> &Mat<F> {
        &self.values
    }

    pub fn member(&self, i: usize) -> &[F] {
        self.values.row(i)
    }

    pub fn column_mean(&self) -> Vec<F> {
        let b = F::from_usize(self.ensemble_size()).unwrap();
        (0..self.test_count())
            .map(|j| self.values.col(j).into_iter().sum::<F>() / b)
            .collect()
    }

    /// Unbiased per-column sample variance (divisor b − 1), computed with
    /// the two-pass formula.
    pub fn column_variance(&self) -> Vec<F> {
        let b = self.ensemble_size();
        let bf = F::from_usize(b).unwrap();
        let mean = self.column_mean();
        (0..self.test_count())
            .map(|j| {
                let mut acc = F::zero();
                for i in 0..b {
                    let d = self.values[(i, j)] - mean[j];
                    acc += d * d;
                }
                acc / (bf - F::one())
            })
            .collect()
    }

    /// Per-column sample standard deviation.
    pub fn column_std(&self) -> Vec<F> {
        self.column_variance().into_iter().map(F::sqrt).collect()
    }
}

/// Per-test-point uncertainty: the unbiased column variance of the
/// ensemble. Requires b ≥ 2.
pub fn rue_score<F: Real>(predictions: &EnsemblePredictions<F>) -> Result<Vec<F>, AuditError> {
    if predictions.ensemble_size() < 2 {
        return Err(AuditError::EnsembleTooSmall(predictions.ensemble_size()));
    }
    Ok(predictions.column_variance())
}

/// Generate the resampling ensemble: for each member, draw multinomial
/// weights from its own (seed, member) stream, take the one-step parameter
/// update, and predict at every test point.
pub fn rue_ensemble<F: Real>(
    ctx: &AuditContext<F>,
    x_test: &Mat<F>,
    ensemble_size: usize,
    seed: u64,
) -> Result<EnsemblePredictions<F>, AuditError> {
    if ensemble_size < 2 {
        return Err(AuditError::EnsembleTooSmall(ensemble_size));
    }
    let m = x_test.rows();
    let mut values = Mat::zeros(ensemble_size, m);
    for i in 0..ensemble_size {
        let mut rng = stream_rng(seed, ENSEMBLE_MEMBER_STREAM_BASE + i as u64);
        let weights = multinomial_sample(ctx.n, &mut rng)?;
        let theta_star = ctx.resample_theta(&weights)?;
        for j in 0..m {
            values[(i, j)] = model::forward(&ctx.arch, &theta_star, x_test.row(j))?;
        }
    }
    EnsemblePredictions::new(values)
}

/// Model-dependent similarity k(x₁, x₂) = [∇f(x₁)ᵀ H̃⁻¹ ∇f(x₂)]².
pub fn rue_kernel<F: Real>(ctx: &AuditContext<F>, x1: &[F], x2: &[F]) -> Result<F, AuditError> {
    let g1 = model::prediction_gradient(&ctx.arch, &ctx.theta_hat, x1)?;
    let g2 = model::prediction_gradient(&ctx.arch, &ctx.theta_hat, x2)?;
    let hinv_g2 = ctx.solve_damped(g2.values());
    let bilinear = g1
        .values()
        .iter()
        .zip(&hinv_g2)
        .map(|(a, b)| *a * *b)
        .sum::<F>();
    Ok(bilinear * bilinear)
}

/// Kernel Gram matrix over a point set. Each pair is evaluated once and
/// mirrored, so the result is exactly symmetric; one damped solve per point
/// is shared across its row.
pub fn rue_kernel_gram<F: Real>(
    ctx: &AuditContext<F>,
    points: &Mat<F>,
) -> Result<Mat<F>, AuditError> {
    let m = points.rows();
    let mut grads = Vec::with_capacity(m);
    let mut solved = Vec::with_capacity(m);
    for i in 0..m {
        let g = model::prediction_gradient(&ctx.arch, &ctx.theta_hat, points.row(i))?;
        solved.push(ctx.solve_damped(g.values()));
        grads.push(g.into_vec());
    }
    let mut gram = Mat::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let bilinear = grads[i]
                .iter()
                .zip(&solved[j])
                .map(|(a, b)| *a * *b)
                .sum::<F>();
            let k = bilinear * bilinear;
            gram[(i, j)] = k;
            gram[(j, i)] = k;
        }
    }
    Ok(gram)
}

/// Kernel-smoothing form of the resampling score:
/// Σᵢ rᵢ² k(x, xᵢ) with rᵢ = f(xᵢ, θ̂) − yᵢ.
pub fn rue_score_approx<F: Real>(
    ctx: &AuditContext<F>,
    train: &Dataset<F>,
    x: &[F],
) -> Result<F, AuditError> {
    let g = model::prediction_gradient(&ctx.arch, &ctx.theta_hat, x)?;
    let v = ctx.solve_damped(g.values());
    let mut acc = F::zero();
    for i in 0..train.n() {
        let f = model::forward(&ctx.arch, &ctx.theta_hat, train.input_row(i))?;
        let r = f - train.target(i);
        let gi = model::prediction_gradient(&ctx.arch, &ctx.theta_hat, train.input_row(i))?;
        let k_sqrt = gi.values().iter().zip(&v).map(|(a, b)| *a * *b).sum::<F>();
        acc += r * r * k_sqrt * k_sqrt;
    }
    Ok(acc)
}

/// Misspecification-robust variance ∇fᵀ H̃⁻¹ L Lᵀ H̃⁻¹ ∇f, evaluated as
/// ‖Aᵀ∇f‖². Coincides with [`rue_score_approx`].
pub fn sandwich_variance<F: Real>(ctx: &AuditContext<F>, x: &[F]) -> Result<F, AuditError> {
    let g = model::prediction_gradient(&ctx.arch, &ctx.theta_hat, x)?;
    let at_g = ctx.influence.tr_matvec(g.values());
    Ok(at_g.iter().map(|v| *v * *v).sum())
}

/// Scoring method selector shared by the CLI and the benchmark harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rue,
    RueApprox,
    Sandwich,
    Laplace,
    BootstrapSgd,
    Kde,
    /// Seeded random scores, independent of the data; a control whose AUC
    /// should hover at one half.
    Null,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Rue,
        Method::RueApprox,
        Method::Sandwich,
        Method::Laplace,
        Method::BootstrapSgd,
        Method::Kde,
        Method::Null,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Rue => "rue",
            Method::RueApprox => "rue-approx",
            Method::Sandwich => "sandwich",
            Method::Laplace => "laplace",
            Method::BootstrapSgd => "bootstrap-sgd",
            Method::Kde => "kde",
            Method::Null => "null",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.iter().copied().find(|m| m.name() == s)
    }

    /// Whether the score is a predictive-variance estimate (and can seed a
    /// Gaussian predictive distribution). KDE scores are negative densities
    /// and the null scorer is noise, so neither qualifies.
    pub fn is_variance_based(&self) -> bool {
        !matches!(self, Method::Kde | Method::Null)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Knobs for the scoring methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreOptions<F> {
    pub ensemble_size: usize,
    pub sgd_step: F,
    pub sgd_centered: bool,
    pub kde_folds: usize,
    pub kde_grid: Vec<F>,
}

impl<F: Real> Default for ScoreOptions<F> {
    fn default() -> Self {
        ScoreOptions {
            ensemble_size: 100,
            sgd_step: F::from_f64(0.001).unwrap(),
            sgd_centered: false,
            kde_folds: 5,
            kde_grid: default_bandwidth_grid(),
        }
    }
}

/// Score every row of `x_test` with one method. Higher always means less
/// reliable.
pub fn score_method<F: Real>(
    method: Method,
    ctx: &AuditContext<F>,
    train: &Dataset<F>,
    x_test: &Mat<F>,
    opts: &ScoreOptions<F>,
    seed: u64,
) -> Result<Vec<F>, AuditError> {
    let m = x_test.rows();
    match method {
        Method::Rue => {
            let ens = rue_ensemble(ctx, x_test, opts.ensemble_size, seed)?;
            rue_score(&ens)
        }
        Method::RueApprox => (0..m)
            .map(|j| rue_score_approx(ctx, train, x_test.row(j)))
            .collect(),
        Method::Sandwich => (0..m)
            .map(|j| sandwich_variance(ctx, x_test.row(j)))
            .collect(),
        Method::Laplace => {
            let ens = laplace_ensemble(ctx, x_test, opts.ensemble_size, seed)?;
            rue_score(&ens)
        }
        Method::BootstrapSgd => {
            let ens = bootstrap_sgd_ensemble(
                &ctx.arch,
                &ctx.theta_hat,
                &ctx.loss_gradients,
                x_test,
                opts.ensemble_size,
                opts.sgd_step,
                opts.sgd_centered,
                seed,
            )?;
            rue_score(&ens)
        }
        Method::Kde => {
            let bandwidth = kde_bandwidth_cv(train.inputs(), opts.kde_folds, &opts.kde_grid, seed)?;
            Ok((0..m)
                .map(|j| kde_score(train.inputs(), x_test.row(j), bandwidth))
                .collect())
        }
        Method::Null => {
            let mut rng = stream_rng(seed, STREAM_NULL);
            Ok((0..m)
                .map(|_| F::from_f64(rng.random::<f64>()).unwrap())
                .collect())
        }
    }
}
