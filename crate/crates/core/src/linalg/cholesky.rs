//! Cholesky factorization for symmetric positive definite systems.
//!
//! The factorization is computed once and reused against many right-hand
//! sides (the audit context solves the damped Hessian against every column
//! of the loss gradient matrix).

use crate::linalg::{LinalgError, Mat};
use crate::Real;

/// Lower-triangular Cholesky factor L with M = L Lᵀ.
#[derive(Debug, Clone)]
pub struct CholeskyFactor<F> {
    lower: Mat<F>,
}

impl<F: Real> CholeskyFactor<F> {
    /// Factor a symmetric positive definite matrix. Fails on any
    /// non-positive pivot, which signals the dampening policy was not
    /// applied (or the input is indefinite).
    pub fn factor(matrix: &Mat<F>) -> Result<Self, LinalgError> {
        let n = matrix.rows();
        assert_eq!(n, matrix.cols(), "cholesky needs a square matrix");
        if !matrix.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let mut lower = Mat::zeros(n, n);
        for j in 0..n {
            let mut diag = matrix[(j, j)];
            for k in 0..j {
                diag -= lower[(j, k)] * lower[(j, k)];
            }
            if diag <= F::zero() || !diag.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { pivot: j });
            }
            let ljj = diag.sqrt();
            lower[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut v = matrix[(i, j)];
                for k in 0..j {
                    v -= lower[(i, k)] * lower[(j, k)];
                }
                lower[(i, j)] = v / ljj;
            }
        }
        Ok(CholeskyFactor { lower })
    }

    pub(crate) fn from_lower(lower: Mat<F>) -> Self {
        assert_eq!(lower.rows(), lower.cols());
        CholeskyFactor { lower }
    }

    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    pub fn lower(&self) -> &Mat<F> {
        &self.lower
    }

    /// Solve M x = b.
    pub fn solve_vec(&self, b: &[F]) -> Vec<F> {
        let n = self.dim();
        assert_eq!(b.len(), n, "solve dimension mismatch");
        // Forward: L y = b
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let step = self.lower[(i, k)] * y[k];
                y[i] -= step;
            }
            y[i] /= self.lower[(i, i)];
        }
        // Back: Lᵀ x = y
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let step = self.lower[(k, i)] * y[k];
                y[i] -= step;
            }
            y[i] /= self.lower[(i, i)];
        }
        y
    }

    /// Solve M X = B column by column.
    pub fn solve_mat(&self, b: &Mat<F>) -> Mat<F> {
        assert_eq!(b.rows(), self.dim(), "solve dimension mismatch");
        let mut out = Mat::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let col = b.col(j);
            out.set_col(j, &self.solve_vec(&col));
        }
        out
    }

    /// Solve Lᵀ x = z. With z a standard normal draw, x is distributed
    /// N(0, M⁻¹), which is how the Laplace baseline samples parameters.
    pub fn solve_transpose_vec(&self, z: &[F]) -> Vec<F> {
        let n = self.dim();
        assert_eq!(z.len(), n, "solve dimension mismatch");
        let mut x = z.to_vec();
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let step = self.lower[(k, i)] * x[k];
                x[i] -= step;
            }
            x[i] /= self.lower[(i, i)];
        }
        x
    }
}
