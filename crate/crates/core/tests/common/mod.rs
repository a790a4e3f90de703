//! Shared oracles for the integration and acceptance suites. Everything
//! here is deliberately plain: finite differences over the public objective
//! and forward functions, and Gauss-Jordan solves independent of the
//! library's factorization path.

#![allow(dead_code)]

use rand::Rng;
use rue_core::data::Dataset;
use rue_core::model::{forward, objective, objective_gradient, Architecture, ParamVector, Penalty};
use rue_core::seeding::stream_rng;

/// Standard-normal quantile for central 90% intervals.
pub const Z_90: f64 = 1.6448536269514722;

/// Componentwise closeness: |a − b| ≤ max(rel·max(|a|,|b|), floor).
pub fn close_with_floor(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= (rel * a.abs().max(b.abs())).max(floor)
}

pub fn assert_vec_close(a: &[f64], b: &[f64], rel: f64, floor: f64, what: &str) {
    assert_eq!(a.len(), b.len(), "{what}: length mismatch");
    for (i, (&x, &y)) in a.iter().zip(b).enumerate() {
        assert!(
            close_with_floor(x, y, rel, floor),
            "{what}: component {i} differs: {x} vs {y} (|diff| = {:e})",
            (x - y).abs()
        );
    }
}

/// Central finite differences of the per-sample loss ½(y − f(x, θ))².
pub fn fd_loss_gradient(
    arch: &Architecture,
    theta: &ParamVector<f64>,
    x: &[f64],
    y: f64,
    step: f64,
) -> Vec<f64> {
    let d = arch.param_count();
    let mut grad = vec![0.0; d];
    let mut t = theta.as_slice().to_vec();
    for i in 0..d {
        let orig = t[i];
        t[i] = orig + step;
        let fp = forward(arch, &ParamVector::new(t.clone()).unwrap(), x).unwrap();
        let lp = 0.5 * (y - fp) * (y - fp);
        t[i] = orig - step;
        let fm = forward(arch, &ParamVector::new(t.clone()).unwrap(), x).unwrap();
        let lm = 0.5 * (y - fm) * (y - fm);
        t[i] = orig;
        grad[i] = (lp - lm) / (2.0 * step);
    }
    grad
}

/// Central finite differences of the model output.
pub fn fd_prediction_gradient(
    arch: &Architecture,
    theta: &ParamVector<f64>,
    x: &[f64],
    step: f64,
) -> Vec<f64> {
    let d = arch.param_count();
    let mut grad = vec![0.0; d];
    let mut t = theta.as_slice().to_vec();
    for i in 0..d {
        let orig = t[i];
        t[i] = orig + step;
        let fp = forward(arch, &ParamVector::new(t.clone()).unwrap(), x).unwrap();
        t[i] = orig - step;
        let fm = forward(arch, &ParamVector::new(t.clone()).unwrap(), x).unwrap();
        t[i] = orig;
        grad[i] = (fp - fm) / (2.0 * step);
    }
    grad
}

/// Central finite differences of the full objective.
pub fn fd_objective_gradient(
    arch: &Architecture,
    theta: &ParamVector<f64>,
    data: &Dataset<f64>,
    penalty: Penalty<f64>,
    step: f64,
) -> Vec<f64> {
    let d = arch.param_count();
    let mut grad = vec![0.0; d];
    let mut t = theta.as_slice().to_vec();
    for i in 0..d {
        let orig = t[i];
        t[i] = orig + step;
        let jp = objective(arch, &ParamVector::new(t.clone()).unwrap(), data, penalty).unwrap();
        t[i] = orig - step;
        let jm = objective(arch, &ParamVector::new(t.clone()).unwrap(), data, penalty).unwrap();
        t[i] = orig;
        grad[i] = (jp - jm) / (2.0 * step);
    }
    grad
}

/// (∇J(θ + εv) − ∇J(θ − εv)) / 2ε with analytic gradients.
pub fn fd_hessian_vector_product(
    arch: &Architecture,
    theta: &ParamVector<f64>,
    data: &Dataset<f64>,
    penalty: Penalty<f64>,
    v: &[f64],
    eps: f64,
) -> Vec<f64> {
    let plus: Vec<f64> = theta
        .as_slice()
        .iter()
        .zip(v)
        .map(|(t, vi)| t + eps * vi)
        .collect();
    let minus: Vec<f64> = theta
        .as_slice()
        .iter()
        .zip(v)
        .map(|(t, vi)| t - eps * vi)
        .collect();
    let gp = objective_gradient(arch, &ParamVector::new(plus).unwrap(), data, penalty).unwrap();
    let gm = objective_gradient(arch, &ParamVector::new(minus).unwrap(), data, penalty).unwrap();
    gp.iter()
        .zip(&gm)
        .map(|(p, m)| (p - m) / (2.0 * eps))
        .collect()
}

/// A random small MLP instance: architecture, parameters, dataset.
pub fn random_mlp_instance(seed: u64) -> (Architecture, ParamVector<f64>, Dataset<f64>) {
    let mut rng = stream_rng(seed, 0);
    let p = rng.random_range(1..=5usize);
    let h = rng.random_range(1..=8usize);
    let n = rng.random_range(2..=30usize);
    let arch = Architecture::mlp(p, h).unwrap();
    let theta = ParamVector::new(
        (0..arch.param_count())
            .map(|_| rng.random_range(-0.8..0.8))
            .collect(),
    )
    .unwrap();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect();
    let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
    (arch, theta, Dataset::from_rows(&rows, ys).unwrap())
}

/// Gauss-Jordan solve with partial pivoting; independent of the library's
/// Cholesky/eigen machinery.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    assert!(a.len() == n && a.iter().all(|row| row.len() == n));
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let diag = a[col][col];
        assert!(diag.abs() > 1e-300, "singular system in oracle solve");
        for j in col..n {
            a[col][j] /= diag;
        }
        b[col] /= diag;
        for i in 0..n {
            if i == col {
                continue;
            }
            let factor = a[i][col];
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[i][j] -= factor * a[col][j];
            }
            b[i] -= factor * b[col];
        }
    }
    b
}

/// Closed-form ridge solution over the bias-augmented design:
/// (X̃ᵀX̃ + αI)θ = X̃ᵀy.
pub fn ridge_theta(rows: &[Vec<f64>], ys: &[f64], alpha: f64) -> Vec<f64> {
    reweighted_ridge_theta(rows, ys, &vec![1.0; ys.len()], alpha)
}

/// (X̃ᵀWX̃ + αI)θ = X̃ᵀWy with diagonal weights W.
pub fn reweighted_ridge_theta(
    rows: &[Vec<f64>],
    ys: &[f64],
    weights: &[f64],
    alpha: f64,
) -> Vec<f64> {
    let p = rows[0].len();
    let d = p + 1;
    let aug = |row: &Vec<f64>, j: usize| if j < p { row[j] } else { 1.0 };
    let mut a = vec![vec![0.0; d]; d];
    let mut b = vec![0.0; d];
    for (row, (&y, &w)) in rows.iter().zip(ys.iter().zip(weights)) {
        for i in 0..d {
            b[i] += w * aug(row, i) * y;
            for j in 0..d {
                a[i][j] += w * aug(row, i) * aug(row, j);
            }
        }
    }
    for i in 0..d {
        a[i][i] += alpha;
    }
    solve_dense(a, b)
}

/// Ridge objective value ½Σ(yᵢ − x̃ᵢᵀθ)² + (α/2)‖θ‖².
pub fn ridge_objective(rows: &[Vec<f64>], ys: &[f64], theta: &[f64], alpha: f64) -> f64 {
    let p = rows[0].len();
    let mut acc = 0.0;
    for (row, &y) in rows.iter().zip(ys) {
        let mut f = theta[p];
        for j in 0..p {
            f += theta[j] * row[j];
        }
        acc += 0.5 * (y - f) * (y - f);
    }
    acc + 0.5 * alpha * theta.iter().map(|t| t * t).sum::<f64>()
}

/// Sample variance with its Monte Carlo standard error
/// Var(s²) ≈ (μ̂₄ − s⁴(b−3)/(b−1)) / b.
pub fn variance_with_se(samples: &[f64]) -> (f64, f64) {
    let b = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / b;
    let s2 = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1.0);
    let m4 = samples.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / b;
    let var_s2 = ((m4 - s2 * s2 * (b - 3.0) / (b - 1.0)) / b).max(0.0);
    (s2, var_s2.sqrt())
}

/// O(n²) pairwise AUC with half-credit ties; the brute-force oracle.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0f64;
    let mut pairs = 0.0f64;
    for (&si, &li) in scores.iter().zip(labels) {
        if !li {
            continue;
        }
        for (&sj, &lj) in scores.iter().zip(labels) {
            if lj {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}
