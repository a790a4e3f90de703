//! Dense real linear algebra and random sampling primitives sized for a few
//! thousand parameters.

mod cholesky;
mod eigen;
mod mat;
mod weights;

pub use cholesky::CholeskyFactor;
pub use mat::Mat;
pub use weights::{multinomial_sample, WeightVector};

use thiserror::Error;

use crate::Real;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is not symmetric within tolerance (max deviation {max_dev})")]
    NotSymmetric { max_dev: f64 },
    #[error("matrix is not positive definite (pivot {pivot} non-positive)")]
    NotPositiveDefinite { pivot: usize },
    #[error("QL iteration failed to converge for eigenvalue {index}")]
    EigenNoConvergence { index: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("multinomial sample requires at least one trial")]
    EmptyMultinomial,
    #[error("weight counts must sum to n (expected {expected}, got {actual})")]
    WeightSum { expected: u64, actual: u64 },
}

fn symmetry_tolerance<F: Real>() -> F {
    let base = F::from_f64(1e-10).unwrap();
    let eps_scaled = F::epsilon() * F::from_f64(100.0).unwrap();
    if eps_scaled > base {
        eps_scaled
    } else {
        base
    }
}

/// Symmetric matrix with finite entries, validated on construction.
#[derive(Debug, Clone)]
pub struct SymmetricMatrix<F> {
    data: Mat<F>,
}

impl<F: Real> SymmetricMatrix<F> {
    /// Accepts a matrix that is symmetric to within 1e-10 relative tolerance
    /// (relative to its largest entry) and stores the exactly symmetrized
    /// average (M + Mᵀ)/2.
    pub fn new(data: Mat<F>) -> Result<Self, LinalgError> {
        assert_eq!(data.rows(), data.cols(), "symmetric matrix must be square");
        if !data.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let scale = data.max_abs().max(F::one());
        let mut max_dev = F::zero();
        for i in 0..data.rows() {
            for j in (i + 1)..data.cols() {
                let dev = (data[(i, j)] - data[(j, i)]).abs();
                if dev > max_dev {
                    max_dev = dev;
                }
            }
        }
        if max_dev > symmetry_tolerance::<F>() * scale {
            return Err(LinalgError::NotSymmetric {
                max_dev: (max_dev / scale).to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(SymmetricMatrix {
            data: symmetrize(&data),
        })
    }

    pub fn identity(n: usize) -> Self {
        SymmetricMatrix {
            data: Mat::identity(n),
        }
    }

    pub fn from_diagonal(diag: &[F]) -> Self {
        let n = diag.len();
        let mut m = Mat::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        SymmetricMatrix { data: m }
    }

    pub fn dim(&self) -> usize {
        self.data.rows()
    }

    pub fn as_mat(&self) -> &Mat<F> {
        &self.data
    }

    pub fn trace(&self) -> F {
        (0..self.dim()).map(|i| self.data[(i, i)]).sum()
    }

    /// M + shift·I.
    pub fn shifted(&self, shift: F) -> SymmetricMatrix<F> {
        let mut data = self.data.clone();
        for i in 0..data.rows() {
            data[(i, i)] += shift;
        }
        SymmetricMatrix { data }
    }
}

/// (M + Mᵀ)/2.
pub fn symmetrize<F: Real>(m: &Mat<F>) -> Mat<F> {
    let half = F::from_f64(0.5).unwrap();
    Mat::from_fn(m.rows(), m.cols(), |i, j| (m[(i, j)] + m[(j, i)]) * half)
}

/// Eigendecomposition of a symmetric matrix: ascending eigenvalues and an
/// orthonormal eigenvector column matrix.
#[derive(Debug, Clone)]
pub struct EigenDecomposition<F> {
    eigenvalues: Vec<F>,
    eigenvectors: Mat<F>,
}

impl<F: Real> EigenDecomposition<F> {
    pub fn eigenvalues(&self) -> &[F] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Mat<F> {
        &self.eigenvectors
    }

    pub fn min_eigenvalue(&self) -> F {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> F {
        *self.eigenvalues.last().expect("nonempty spectrum")
    }

    /// Q Λ Qᵀ.
    pub fn reconstruct(&self) -> Mat<F> {
        let n = self.eigenvalues.len();
        let q = &self.eigenvectors;
        Mat::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| q[(i, k)] * self.eigenvalues[k] * q[(j, k)])
                .sum()
        })
    }

    /// Q Λ⁻¹ Qᵀ. Used as an independent inverse oracle in tests; the
    /// production solve path goes through the Cholesky factorization.
    pub fn inverse(&self) -> Mat<F> {
        let n = self.eigenvalues.len();
        let q = &self.eigenvectors;
        Mat::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| q[(i, k)] / self.eigenvalues[k] * q[(j, k)])
                .sum()
        })
    }
}

/// Eigendecompose a symmetric matrix; eigenvalues ascend.
pub fn sym_eigendecomp<F: Real>(
    matrix: &SymmetricMatrix<F>,
) -> Result<EigenDecomposition<F>, LinalgError> {
    let (eigenvalues, eigenvectors) = eigen::symmetric_eigen(matrix.as_mat())?;
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Solve M X = B for symmetric positive definite M via Cholesky.
pub fn solve_spd<F: Real>(
    matrix: &SymmetricMatrix<F>,
    rhs: &Mat<F>,
) -> Result<Mat<F>, LinalgError> {
    if rhs.rows() != matrix.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: matrix.dim(),
            actual: rhs.rows(),
        });
    }
    let factor = CholeskyFactor::factor(matrix.as_mat())?;
    Ok(factor.solve_mat(rhs))
}
