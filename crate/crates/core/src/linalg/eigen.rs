//! Symmetric eigendecomposition: Householder reduction to tridiagonal form
//! followed by the implicit-shift QL iteration, with accumulation of the
//! orthogonal transform. Exactness is validated by reconstruction invariants
//! rather than comparison to any particular library routine.

use crate::linalg::{LinalgError, Mat};
use crate::Real;

const MAX_QL_ITERS: usize = 64;

/// Reduce the symmetric matrix stored in `a` to tridiagonal form, replacing
/// `a` with the accumulated orthogonal transform. Returns (diagonal,
/// subdiagonal) with the subdiagonal in `e[1..]`.
fn householder_tridiagonalize<F: Real>(a: &mut Mat<F>) -> (Vec<F>, Vec<F>) {
    let n = a.rows();
    let mut d = vec![F::zero(); n];
    let mut e = vec![F::zero(); n];

    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = F::zero();
        if l > 0 {
            let mut scale = F::zero();
            for k in 0..=l {
                scale += a[(i, k)].abs();
            }
            if scale == F::zero() {
                e[i] = a[(i, l)];
            } else {
                for k in 0..=l {
                    a[(i, k)] /= scale;
                    h += a[(i, k)] * a[(i, k)];
                }
                let f = a[(i, l)];
                let g = if f >= F::zero() { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[(i, l)] = f - g;
                let mut f_acc = F::zero();
                for j in 0..=l {
                    a[(j, i)] = a[(i, j)] / h;
                    let mut g_acc = F::zero();
                    for k in 0..=j {
                        g_acc += a[(j, k)] * a[(i, k)];
                    }
                    for k in (j + 1)..=l {
                        g_acc += a[(k, j)] * a[(i, k)];
                    }
                    e[j] = g_acc / h;
                    f_acc += e[j] * a[(i, j)];
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let f = a[(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[(j, k)] = a[(j, k)] - (f * e[k] + g * a[(i, k)]);
                    }
                }
            }
        } else {
            e[i] = a[(i, l)];
        }
        d[i] = h;
    }
    d[0] = F::zero();
    e[0] = F::zero();

    // Accumulate the Householder transforms into `a`.
    for i in 0..n {
        if d[i] != F::zero() {
            for j in 0..i {
                let mut g = F::zero();
                for k in 0..i {
                    g += a[(i, k)] * a[(k, j)];
                }
                for k in 0..i {
                    a[(k, j)] = a[(k, j)] - g * a[(k, i)];
                }
            }
        }
        d[i] = a[(i, i)];
        a[(i, i)] = F::one();
        for j in 0..i {
            a[(j, i)] = F::zero();
            a[(i, j)] = F::zero();
        }
    }
    (d, e)
}

fn copysign_mag<F: Real>(magnitude: F, sign_of: F) -> F {
    if sign_of >= F::zero() {
        magnitude.abs()
    } else {
        -magnitude.abs()
    }
}

/// QL iteration with implicit shifts on a symmetric tridiagonal matrix,
/// rotating the columns of `z` along with it.
fn ql_implicit<F: Real>(d: &mut [F], e: &mut [F], z: &mut Mat<F>) -> Result<(), LinalgError> {
    let n = d.len();
    if n <= 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = F::zero();

    for l in 0..n {
        let mut iter = 0usize;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= F::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITERS {
                return Err(LinalgError::EigenNoConvergence { index: l });
            }
            let two = F::one() + F::one();
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(F::one());
            g = d[m] - d[l] + e[l] / (g + copysign_mag(r, g));
            let mut s = F::one();
            let mut c = F::one();
            let mut p = F::zero();
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == F::zero() {
                    d[i + 1] -= p;
                    e[m] = F::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[(k, i + 1)];
                    z[(k, i + 1)] = s * z[(k, i)] + c * f;
                    z[(k, i)] = c * z[(k, i)] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = F::zero();
        }
    }
    Ok(())
}

/// Full symmetric eigendecomposition of the (exactly symmetrized) input.
/// Returns eigenvalues ascending with matching eigenvector columns.
pub(crate) fn symmetric_eigen<F: Real>(matrix: &Mat<F>) -> Result<(Vec<F>, Mat<F>), LinalgError> {
    let n = matrix.rows();
    assert_eq!(n, matrix.cols(), "eigendecomposition needs a square matrix");
    if !matrix.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let half = F::from_f64(0.5).unwrap();
    let mut work = Mat::from_fn(n, n, |i, j| (matrix[(i, j)] + matrix[(j, i)]) * half);
    let (mut d, mut e) = householder_tridiagonalize(&mut work);
    ql_implicit(&mut d, &mut e, &mut work)?;

    // Sort ascending, permuting eigenvector columns to match.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).expect("finite eigenvalues"));
    let values: Vec<F> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, new_j)] = work[(i, old_j)];
        }
    }
    Ok((values, vectors))
}
