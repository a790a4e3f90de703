//! After-learning baseline scores: Laplace sampling, the single-step
//! bootstrap, and input-density KDE.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::audit::{AuditContext, AuditError, EnsemblePredictions, ENSEMBLE_MEMBER_STREAM_BASE};
use crate::linalg::{multinomial_sample, Mat};
use crate::model::{self, Architecture, LossGradientMatrix, ParamVector};
use crate::seeding::{stream_rng, STREAM_FOLDS};
use crate::Real;

/// Sample θ ~ N(θ̂, H̃⁻¹) through the cached Cholesky factor and collect an
/// ensemble of predictions. With H̃ = LLᵀ, solving Lᵀu = z for standard
/// normal z gives u with covariance H̃⁻¹.
pub fn laplace_ensemble<F: Real>(
    ctx: &AuditContext<F>,
    x_test: &Mat<F>,
    ensemble_size: usize,
    seed: u64,
) -> Result<EnsemblePredictions<F>, AuditError> {
    if ensemble_size < 2 {
        return Err(AuditError::EnsembleTooSmall(ensemble_size));
    }
    let d = ctx.dim();
    let m = x_test.rows();
    let mut values = Mat::zeros(ensemble_size, m);
    for i in 0..ensemble_size {
        let mut rng = stream_rng(seed, ENSEMBLE_MEMBER_STREAM_BASE + i as u64);
        let z: Vec<F> = (0..d)
            .map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                F::from_f64(v).unwrap()
            })
            .collect();
        let u = ctx.factor().solve_transpose_vec(&z);
        let mut theta = ctx.theta_hat().as_slice().to_vec();
        for (t, ui) in theta.iter_mut().zip(&u) {
            *t += *ui;
        }
        let theta = ParamVector::new(theta)?;
        for j in 0..m {
            values[(i, j)] = model::forward(ctx.arch(), &theta, x_test.row(j))?;
        }
    }
    EnsemblePredictions::new(values)
}

/// Linearized Laplace predictive variance ∇f(x)ᵀ H̃⁻¹ ∇f(x).
pub fn laplace_score_closed<F: Real>(ctx: &AuditContext<F>, x: &[F]) -> Result<F, AuditError> {
    let g = model::prediction_gradient(ctx.arch(), ctx.theta_hat(), x)?;
    let hinv_g = ctx.solve_damped(g.values());
    Ok(g.values().iter().zip(&hinv_g).map(|(a, b)| *a * *b).sum())
}

/// First-order bootstrap baseline: each member takes a single gradient step
/// on a resampled weighting, θ*ᵢ = θ̂ − η·L·wᵢ. The uncentered update is the
/// literal formula; `centered` switches to η·L·(wᵢ − w₀) for study.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_sgd_ensemble<F: Real>(
    arch: &Architecture,
    theta_hat: &ParamVector<F>,
    loss_gradients: &LossGradientMatrix<F>,
    x_test: &Mat<F>,
    ensemble_size: usize,
    step_size: F,
    centered: bool,
    seed: u64,
) -> Result<EnsemblePredictions<F>, AuditError> {
    if ensemble_size < 2 {
        return Err(AuditError::EnsembleTooSmall(ensemble_size));
    }
    let n = loss_gradients.sample_count();
    let m = x_test.rows();
    let mut values = Mat::zeros(ensemble_size, m);
    for i in 0..ensemble_size {
        let mut rng = stream_rng(seed, ENSEMBLE_MEMBER_STREAM_BASE + i as u64);
        let weights = multinomial_sample(n, &mut rng)?;
        let w: Vec<F> = if centered {
            weights.delta_from_ones()
        } else {
            weights.to_reals()
        };
        let lw = loss_gradients.as_mat().matvec(&w);
        let mut theta = theta_hat.as_slice().to_vec();
        for (t, g) in theta.iter_mut().zip(&lw) {
            *t -= step_size * *g;
        }
        let theta = ParamVector::new(theta)?;
        for j in 0..m {
            values[(i, j)] = model::forward(arch, &theta, x_test.row(j))?;
        }
    }
    EnsemblePredictions::new(values)
}

/// Negative isotropic-Gaussian KDE density of the input:
/// −(1/n) Σᵢ (2πh²)^(−p/2) exp(−‖x − xᵢ‖²/(2h²)).
/// Higher (closer to zero) means farther from the training inputs.
pub fn kde_score<F: Real>(train_inputs: &Mat<F>, x: &[F], bandwidth: F) -> F {
    let n = train_inputs.rows();
    let p = train_inputs.cols();
    assert_eq!(x.len(), p, "kde input dimension mismatch");
    let two = F::from_f64(2.0).unwrap();
    let two_pi = F::from_f64(std::f64::consts::TAU).unwrap();
    let h2 = bandwidth * bandwidth;
    let norm = (two_pi * h2).powf(-F::from_usize(p).unwrap() / two);
    let mut acc = F::zero();
    for i in 0..n {
        let mut sq = F::zero();
        for (a, b) in train_inputs.row(i).iter().zip(x) {
            let d = *a - *b;
            sq += d * d;
        }
        acc += (-sq / (two * h2)).exp();
    }
    -norm * acc / F::from_usize(n).unwrap()
}

/// Mean held-out log density of `held` rows under the KDE built from
/// `kept` rows.
fn heldout_log_density<F: Real>(
    inputs: &Mat<F>,
    kept: &[usize],
    held: &[usize],
    bandwidth: F,
) -> F {
    let p = inputs.cols();
    let two = F::from_f64(2.0).unwrap();
    let two_pi = F::from_f64(std::f64::consts::TAU).unwrap();
    let h2 = bandwidth * bandwidth;
    let norm = (two_pi * h2).powf(-F::from_usize(p).unwrap() / two);
    let nf = F::from_usize(kept.len()).unwrap();
    let mut total = F::zero();
    for &j in held {
        let x = inputs.row(j);
        let mut acc = F::zero();
        for &i in kept {
            let mut sq = F::zero();
            for (a, b) in inputs.row(i).iter().zip(x) {
                let d = *a - *b;
                sq += d * d;
            }
            acc += (-sq / (two * h2)).exp();
        }
        total += (norm * acc / nf).ln();
    }
    total
}

/// Default candidate bandwidths: 20 log-spaced values in [10⁻², 10¹].
pub fn default_bandwidth_grid<F: Real>() -> Vec<F> {
    let lo = 1e-2f64.ln();
    let hi = 10f64.ln();
    (0..20)
        .map(|i| {
            let t = i as f64 / 19.0;
            F::from_f64((lo + t * (hi - lo)).exp()).unwrap()
        })
        .collect()
}

/// Pick the grid bandwidth maximizing mean held-out log density under
/// k-fold cross validation. Fold assignment is a seeded permutation cut
/// into contiguous blocks; ties resolve to the smallest bandwidth.
pub fn kde_bandwidth_cv<F: Real>(
    train_inputs: &Mat<F>,
    folds: usize,
    grid: &[F],
    seed: u64,
) -> Result<F, AuditError> {
    if grid.is_empty() {
        return Err(AuditError::EmptyBandwidthGrid);
    }
    let n = train_inputs.rows();
    if folds < 2 || folds > n {
        return Err(AuditError::BadFoldCount { folds, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = stream_rng(seed, STREAM_FOLDS);
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    // Contiguous blocks of the permutation; sizes differ by at most one.
    let mut bounds = Vec::with_capacity(folds + 1);
    for k in 0..=folds {
        bounds.push(k * n / folds);
    }

    let mut best: Option<(F, F)> = None; // (score, bandwidth)
    for &bandwidth in grid {
        if !(bandwidth > F::zero()) {
            continue;
        }
        let mut total = F::zero();
        for k in 0..folds {
            let held = &order[bounds[k]..bounds[k + 1]];
            let kept: Vec<usize> = order[..bounds[k]]
                .iter()
                .chain(&order[bounds[k + 1]..])
                .copied()
                .collect();
            total += heldout_log_density(train_inputs, &kept, held, bandwidth);
        }
        let score = total / F::from_usize(n).unwrap();
        if !score.is_finite() {
            continue;
        }
        best = match best {
            None => Some((score, bandwidth)),
            Some((bs, bb)) => {
                if score > bs || (score == bs && bandwidth < bb) {
                    Some((score, bandwidth))
                } else {
                    Some((bs, bb))
                }
            }
        };
    }
    best.map(|(_, b)| b).ok_or(AuditError::DegenerateBandwidths)
}
