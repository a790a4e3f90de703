//! Single-hidden-layer regression model with exact first- and second-order
//! derivatives of the training objective
//!
//!   J(θ) = Σᵢ ½(yᵢ − f(xᵢ, θ))² + (α/2)‖θ‖².
//!
//! The ½ loss convention makes the per-sample residual rᵢ = f(xᵢ) − yᵢ the
//! factor that appears in the chain-rule factorization L = G·R, so the loss
//! gradient matrix decomposes into prediction gradients times residuals.
//!
//! A degenerate linear architecture (no hidden layer) is included; its
//! objective is exactly quadratic, which test oracles rely on.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::linalg::{Mat, SymmetricMatrix};
use crate::Real;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parameter vector has length {actual}, architecture needs {expected}")]
    ParamLength { expected: usize, actual: usize },
    #[error("input has dimension {actual}, architecture needs {expected}")]
    InputDim { expected: usize, actual: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("parameters contain non-finite values")]
    NonFinite,
    #[error("dense Hessian refused: d = {dim} exceeds the configured limit {max}")]
    HessianTooLarge { dim: usize, max: usize },
    #[error("architecture needs input_dim >= 1 and hidden_width >= 1")]
    BadArchitecture,
}

/// Model architecture. The MLP variant is one softplus hidden layer with a
/// scalar linear output; the linear variant is a plain affine map used by
/// oracle tests where the objective is exactly quadratic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    Mlp {
        input_dim: usize,
        hidden_width: usize,
    },
    Linear {
        input_dim: usize,
    },
}

impl Architecture {
    pub fn mlp(input_dim: usize, hidden_width: usize) -> Result<Self, ModelError> {
        if input_dim == 0 || hidden_width == 0 {
            return Err(ModelError::BadArchitecture);
        }
        Ok(Architecture::Mlp {
            input_dim,
            hidden_width,
        })
    }

    pub fn linear(input_dim: usize) -> Result<Self, ModelError> {
        if input_dim == 0 {
            return Err(ModelError::BadArchitecture);
        }
        Ok(Architecture::Linear { input_dim })
    }

    pub fn input_dim(&self) -> usize {
        match *self {
            Architecture::Mlp { input_dim, .. } => input_dim,
            Architecture::Linear { input_dim } => input_dim,
        }
    }

    /// Total parameter count d under the fixed layout
    /// [W₁ row-major, b₁, w₂, b₂] (MLP) or [w, b] (linear).
    pub fn param_count(&self) -> usize {
        match *self {
            Architecture::Mlp {
                input_dim,
                hidden_width,
            } => hidden_width * input_dim + 2 * hidden_width + 1,
            Architecture::Linear { input_dim } => input_dim + 1,
        }
    }

    fn check_theta<F: Real>(&self, theta: &ParamVector<F>) -> Result<(), ModelError> {
        if theta.len() != self.param_count() {
            return Err(ModelError::ParamLength {
                expected: self.param_count(),
                actual: theta.len(),
            });
        }
        Ok(())
    }

    fn check_x<F: Real>(&self, x: &[F]) -> Result<(), ModelError> {
        if x.len() != self.input_dim() {
            return Err(ModelError::InputDim {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }
}

/// Flat parameter vector in the canonical layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector<F> {
    values: Vec<F>,
}

impl<F: Real> ParamVector<F> {
    pub fn new(values: Vec<F>) -> Result<Self, ModelError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(ParamVector { values })
    }

    pub fn zeros(d: usize) -> Self {
        ParamVector {
            values: vec![F::zero(); d],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[F] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<F> {
        self.values
    }
}

/// d×n matrix whose column i is the gradient of the per-sample loss at θ̂.
/// The regularizer is excluded by definition.
#[derive(Debug, Clone)]
pub struct LossGradientMatrix<F> {
    mat: Mat<F>,
}

impl<F: Real> LossGradientMatrix<F> {
    pub(crate) fn from_mat(mat: Mat<F>) -> Self {
        LossGradientMatrix { mat }
    }

    pub fn as_mat(&self) -> &Mat<F> {
        &self.mat
    }

    pub fn param_count(&self) -> usize {
        self.mat.rows()
    }

    pub fn sample_count(&self) -> usize {
        self.mat.cols()
    }

    pub fn column(&self, i: usize) -> Vec<F> {
        self.mat.col(i)
    }
}

/// Gradient of the model output with respect to the parameters.
#[derive(Debug, Clone)]
pub struct PredictionGradient<F> {
    values: Vec<F>,
}

impl<F: Real> PredictionGradient<F> {
    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<F> {
        self.values
    }
}

/// Weight-decay penalty (α/2)‖θ‖², optionally exempting bias parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Penalty<F> {
    pub alpha: F,
    pub regularize_biases: bool,
}

impl<F: Real> Penalty<F> {
    pub fn full(alpha: F) -> Self {
        Penalty {
            alpha,
            regularize_biases: true,
        }
    }

    pub fn none() -> Self {
        Penalty {
            alpha: F::zero(),
            regularize_biases: true,
        }
    }

    /// Per-parameter penalty coefficient (α or 0 for exempt biases).
    fn coeff(&self, arch: &Architecture, index: usize) -> F {
        if self.regularize_biases {
            return self.alpha;
        }
        let is_bias = match *arch {
            Architecture::Mlp {
                input_dim,
                hidden_width,
            } => {
                let w1_end = hidden_width * input_dim;
                let b1_end = w1_end + hidden_width;
                let w2_end = b1_end + hidden_width;
                (index >= w1_end && index < b1_end) || index >= w2_end
            }
            Architecture::Linear { input_dim } => index == input_dim,
        };
        if is_bias {
            F::zero()
        } else {
            self.alpha
        }
    }

    pub fn value(&self, arch: &Architecture, theta: &[F]) -> F {
        let half = F::from_f64(0.5).unwrap();
        let mut acc = F::zero();
        for (i, &t) in theta.iter().enumerate() {
            acc += self.coeff(arch, i) * t * t;
        }
        half * acc
    }

    pub fn add_gradient(&self, arch: &Architecture, theta: &[F], scale: F, out: &mut [F]) {
        for (i, (&t, o)) in theta.iter().zip(out.iter_mut()).enumerate() {
            *o += scale * self.coeff(arch, i) * t;
        }
    }
}

fn softplus<F: Real>(z: F) -> F {
    if z > F::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid<F: Real>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

/// Per-sample forward pass caches for the MLP.
struct MlpActivations<F> {
    pre: Vec<F>,  // z = W₁x + b₁
    post: Vec<F>, // softplus(z)
    value: F,
}

fn mlp_forward<F: Real>(
    input_dim: usize,
    hidden_width: usize,
    theta: &[F],
    x: &[F],
) -> MlpActivations<F> {
    let (p, h) = (input_dim, hidden_width);
    let w1 = &theta[..h * p];
    let b1 = &theta[h * p..h * p + h];
    let w2 = &theta[h * p + h..h * p + 2 * h];
    let b2 = theta[h * p + 2 * h];
    let mut pre = Vec::with_capacity(h);
    let mut post = Vec::with_capacity(h);
    let mut value = b2;
    for k in 0..h {
        let row = &w1[k * p..(k + 1) * p];
        let mut z = b1[k];
        for (w, xi) in row.iter().zip(x) {
            z += *w * *xi;
        }
        let a = softplus(z);
        value += w2[k] * a;
        pre.push(z);
        post.push(a);
    }
    MlpActivations { pre, post, value }
}

/// f(x, θ): w₂ᵀ softplus(W₁x + b₁) + b₂ for the MLP, wᵀx + b for the
/// linear architecture.
pub fn forward<F: Real>(
    arch: &Architecture,
    theta: &ParamVector<F>,
    x: &[F],
) -> Result<F, ModelError> {
    arch.check_theta(theta)?;
    arch.check_x(x)?;
    let t = theta.as_slice();
    match *arch {
        Architecture::Mlp {
            input_dim,
            hidden_width,
        } => Ok(mlp_forward(input_dim, hidden_width, t, x).value),
        Architecture::Linear { input_dim } => {
            let mut f = t[input_dim];
            for (w, xi) in t[..input_dim].iter().zip(x) {
                f += *w * *xi;
            }
            Ok(f)
        }
    }
}

/// Predictions for every row of a dataset.
pub fn predict_all<F: Real>(
    arch: &Architecture,
    theta: &ParamVector<F>,
    data: &Dataset<F>,
) -> Result<Vec<F>, ModelError> {
    (0..data.n())
        .map(|i| forward(arch, theta, data.input_row(i)))
        .collect()
}

/// ∇_θ f(x, θ), written into `out` scaled by `scale` (accumulating).
/// Returns f(x, θ).
fn accumulate_scaled_prediction_gradient<F: Real>(
    arch: &Architecture,
    theta: &[F],
    x: &[F],
    scale: F,
    out: &mut [F],
) -> F {
    match *arch {
        Architecture::Mlp {
            input_dim,
            hidden_width,
        } => {
            let (p, h) = (input_dim, hidden_width);
            let act = mlp_forward(p, h, theta, x);
            let w2 = &theta[h * p + h..h * p + 2 * h];
            for k in 0..h {
                let s = sigmoid(act.pre[k]);
                let gk = scale * w2[k] * s;
                let out_row = &mut out[k * p..(k + 1) * p];
                for (o, xi) in out_row.iter_mut().zip(x) {
                    *o += gk * *xi;
                }
                out[h * p + k] += gk;
                out[h * p + h + k] += scale * act.post[k];
            }
            out[h * p + 2 * h] += scale;
            act.value
        }
        Architecture::Linear { input_dim } => {
            for (o, xi) in out[..input_dim].iter_mut().zip(x) {
                *o += scale * *xi;
            }
            out[input_dim] += scale;
            let t = theta;
            let mut f = t[input_dim];
            for (w, xi) in t[..input_dim].iter().zip(x) {
                f += *w * *xi;
            }
            f
        }
    }
}

/// Exact gradient of the model output with respect to θ.
pub fn prediction_gradient<F: Real>(
    arch: &Architecture,
    theta: &ParamVector<F>,
    x: &[F],
) -> Result<PredictionGradient<F>, ModelError> {
    arch.check_theta(theta)?;
    arch.check_x(x)?;
    let mut values = vec![F::zero(); arch.param_count()];
    accumulate_scaled_prediction_gradient(arch, theta.as_slice(), x, F::one(), &mut values);
    Ok(PredictionGradient { values })
}

/// J(θ) = Σᵢ ½(yᵢ − f(xᵢ, θ))² + penalty.
pub fn objective<F: Real>(
    arch: &Architecture,
    theta: &ParamVector<F>,
    data: &Dataset<F>,
    penalty: Penalty<F>,
) -> Result<F, ModelError> {
    arch.check_theta(theta)?;
    if data.n() == 0 {
        return Err(ModelError::EmptyDataset);
    }
    let half = F::from_f64(0.5).unwrap();
    let mut acc = F::zero();
    for i in 0..data.n() {
        let f = forward(arch, theta, data.input_row(i))?;
        let r = f - data.target(i);
        acc += half * r * r;
    }
    Ok(acc + penalty.value(arch, theta.as_slice()))
}

/// Gradient of the loss restricted to `indices`, plus `penalty_scale` times
/// the penalty gradient. The training loop calls this per minibatch with
/// penalty_scale = |batch| / n so the summed objective is optimized.
pub fn batch_objective_gradient<F: Real>(
    arch: &Architecture,
    theta: &ParamVector<F>,
    data: &Dataset<F>,
    indices: &[usize],
    penalty: Penalty<F>,
    penalty_scale: F,
) -> Result<Vec<F>, ModelError> {
    arch.check_theta(theta)?;
    let t = theta.as_slice();
    let mut grad = vec![F::zero(); arch.param_count()];
    for &i in indices {
        let f = forward(arch, theta, data.input_row(i))?;
        let r = f - data.target(i);
        accumulate_scaled_prediction_gradient(arch, t, data.input_row(i), r, &mut grad);
    }
    penalty.add_gradient(arch, t, penalty_scale, &mut grad);
    Ok(grad)
}

/// Full-data objective gradient.
pub fn objective_gradient<F: Real>(
    arch: &Architecture,
    theta: &ParamVector<F>,
    data: &Dataset<F>,
    penalty: Penalty<F>,
) -> Result<Vec<F>, ModelError> {
    let indices: Vec<usize> = (0..data.n()).collect();
    batch_objective_gradient(arch, theta, data, &indices, penalty, F::one())
}

/// d×n matrix of per-sample loss gradients at θ̂: column i equals
/// (f(xᵢ) − yᵢ)·∇_θ f(xᵢ). The regularizer is excluded.
pub fn loss_gradient_matrix<F: Real>(
    arch: &Architecture,
    theta: &ParamVector<F>,
    data: &Dataset<F>,
) -> Result<LossGradientMatrix<F>, ModelError> {
    arch.check_theta(theta)?;
    if data.n() == 0 {
        return Err(ModelError::EmptyDataset);
    }
    let d = arch.param_count();
    let n = data.n();
    let t = theta.as_slice();
    let mut mat = Mat::zeros(d, n);
    let mut col = vec![F::zero(); d];
    for i in 0..n {
        col.iter_mut().for_each(|v| *v = F::zero());
        let f = forward(arch, theta, data.input_row(i))?;
        let r = f - data.target(i);
        accumulate_scaled_prediction_gradient(arch, t, data.input_row(i), r, &mut col);
        mat.set_col(i, &col);
    }
    Ok(LossGradientMatrix { mat })
}

/// ∇²J(θ)·v computed analytically per sample as
/// gᵢ(gᵢᵀv) + rᵢ·(∇²f(xᵢ))·v, plus the penalty term. The (∇²f)·v piece is
/// the forward-mode directional derivative of the prediction gradient.
pub fn hessian_vector_product<F: Real>(
    arch: &Architecture,
    theta: &ParamVector<F>,
    data: &Dataset<F>,
    penalty: Penalty<F>,
    v: &[F],
) -> Result<Vec<F>, ModelError> {
    arch.check_theta(theta)?;
    let d = arch.param_count();
    if v.len() != d {
        return Err(ModelError::ParamLength {
            expected: d,
            actual: v.len(),
        });
    }
    let t = theta.as_slice();
    let mut out = vec![F::zero(); d];
    match *arch {
        Architecture::Mlp {
            input_dim,
            hidden_width,
        } => {
            let (p, h) = (input_dim, hidden_width);
            let w2 = &t[h * p + h..h * p + 2 * h];
            let v_w1 = &v[..h * p];
            let v_b1 = &v[h * p..h * p + h];
            let v_w2 = &v[h * p + h..h * p + 2 * h];
            let v_b2 = v[h * p + 2 * h];
            for i in 0..data.n() {
                let x = data.input_row(i);
                let act = mlp_forward(p, h, t, x);
                let r = act.value - data.target(i);
                // Tangent pass: directional derivatives along v.
                let mut g_dot_v = v_b2;
                let mut z_dot = vec![F::zero(); h];
                for k in 0..h {
                    let mut zd = v_b1[k];
                    for (w, xi) in v_w1[k * p..(k + 1) * p].iter().zip(x) {
                        zd += *w * *xi;
                    }
                    z_dot[k] = zd;
                    let s = sigmoid(act.pre[k]);
                    g_dot_v += v_w2[k] * act.post[k] + w2[k] * s * zd;
                }
                for k in 0..h {
                    let s = sigmoid(act.pre[k]);
                    let sp = s * (F::one() - s);
                    let g_k = w2[k] * s;
                    // Gauss-Newton part: (gᵀv)·g, curvature part: r·R{g}.
                    let coeff_w1 = g_dot_v * g_k + r * (v_w2[k] * s + w2[k] * sp * z_dot[k]);
                    for (o, xi) in out[k * p..(k + 1) * p].iter_mut().zip(x) {
                        *o += coeff_w1 * *xi;
                    }
                    out[h * p + k] += coeff_w1;
                    out[h * p + h + k] += g_dot_v * act.post[k] + r * s * z_dot[k];
                }
                out[h * p + 2 * h] += g_dot_v;
            }
        }
        Architecture::Linear { input_dim } => {
            // ∇²f = 0, so each sample contributes g(gᵀv) with g = [x; 1].
            for i in 0..data.n() {
                let x = data.input_row(i);
                let mut g_dot_v = v[input_dim];
                for (vj, xj) in v[..input_dim].iter().zip(x) {
                    g_dot_v += *vj * *xj;
                }
                for (o, xj) in out[..input_dim].iter_mut().zip(x) {
                    *o += g_dot_v * *xj;
                }
                out[input_dim] += g_dot_v;
            }
        }
    }
    // Penalty Hessian is α on the regularized coordinates.
    for (i, (o, vi)) in out.iter_mut().zip(v).enumerate() {
        *o += penalty.coeff(arch, i) * *vi;
    }
    Ok(out)
}

/// Default refusal threshold for dense Hessian assembly.
pub const DEFAULT_HESSIAN_DIM_LIMIT: usize = 4000;

/// Dense ∇²J(θ̂), assembled column-by-column from Hessian-vector products
/// against basis vectors and symmetrized by averaging with its transpose.
pub fn objective_hessian<F: Real>(
    arch: &Architecture,
    theta: &ParamVector<F>,
    data: &Dataset<F>,
    penalty: Penalty<F>,
    max_dim: usize,
) -> Result<SymmetricMatrix<F>, ModelError> {
    arch.check_theta(theta)?;
    let d = arch.param_count();
    if d > max_dim {
        return Err(ModelError::HessianTooLarge {
            dim: d,
            max: max_dim,
        });
    }
    let mut raw = Mat::zeros(d, d);
    let mut basis = vec![F::zero(); d];
    for j in 0..d {
        basis[j] = F::one();
        let col = hessian_vector_product(arch, theta, data, penalty, &basis)?;
        raw.set_col(j, &col);
        basis[j] = F::zero();
    }
    let sym = crate::linalg::symmetrize(&raw);
    Ok(SymmetricMatrix::new(sym).expect("symmetrized Hessian is symmetric and finite"))
}
