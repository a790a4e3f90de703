//! Optional binary dump of an audit context. The context is not persisted
//! by default (A and the factorization are d×n and d×d), but rebuilding it
//! costs a Hessian assembly plus an eigendecomposition, so a dump flag is
//! worth having for repeated audits of one model.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::audit::{AuditContext, AuditError};
use crate::linalg::{CholeskyFactor, Mat};
use crate::model::{Architecture, LossGradientMatrix, ParamVector};
use crate::Real;

const MAGIC: &[u8; 8] = b"RUECTX01";

fn io_err(path: &Path, source: std::io::Error) -> AuditError {
    AuditError::PersistIo {
        path: path.display().to_string(),
        source,
    }
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_f64<W: Write>(w: &mut W, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_mat<W: Write, F: Real>(w: &mut W, m: &Mat<F>) -> std::io::Result<()> {
    for v in m.as_slice() {
        write_f64(w, v.to_f64().unwrap())?;
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> std::io::Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn read_mat<R: Read, F: Real>(r: &mut R, rows: usize, cols: usize) -> std::io::Result<Mat<F>> {
    let mut m = Mat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = F::from_f64(read_f64(r)?).unwrap();
        }
    }
    Ok(m)
}

impl<F: Real> AuditContext<F> {
    /// Serialize the context (parameters, L, λ, A, Cholesky factor) as a
    /// little-endian f64 binary blob.
    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<(), AuditError> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut w = BufWriter::new(file);
        let res = (|| -> std::io::Result<()> {
            w.write_all(MAGIC)?;
            match *self.arch() {
                Architecture::Mlp {
                    input_dim,
                    hidden_width,
                } => {
                    write_u64(&mut w, 0)?;
                    write_u64(&mut w, input_dim as u64)?;
                    write_u64(&mut w, hidden_width as u64)?;
                }
                Architecture::Linear { input_dim } => {
                    write_u64(&mut w, 1)?;
                    write_u64(&mut w, input_dim as u64)?;
                    write_u64(&mut w, 0)?;
                }
            }
            write_u64(&mut w, self.dim() as u64)?;
            write_u64(&mut w, self.n() as u64)?;
            write_f64(&mut w, self.lambda().to_f64().unwrap())?;
            write_f64(&mut w, self.min_hessian_eigenvalue().to_f64().unwrap())?;
            for v in self.theta_hat().as_slice() {
                write_f64(&mut w, v.to_f64().unwrap())?;
            }
            write_mat(&mut w, self.loss_gradients().as_mat())?;
            write_mat(&mut w, self.influence())?;
            write_mat(&mut w, self.factor().lower())?;
            w.flush()
        })();
        res.map_err(|e| io_err(path, e))
    }

    /// Load a context previously written by [`AuditContext::write_binary`].
    pub fn read_binary(path: impl AsRef<Path>) -> Result<Self, AuditError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let mut r = BufReader::new(file);

        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|e| io_err(path, e))?;
        if &magic != MAGIC {
            return Err(AuditError::PersistFormat(
                "bad magic; not a context dump".to_string(),
            ));
        }
        type RawDump<F> = (Architecture, Vec<F>, Mat<F>, Mat<F>, Mat<F>, F, F, usize);
        let inner = (|| -> std::io::Result<RawDump<F>> {
            let tag = read_u64(&mut r)?;
            let a = read_u64(&mut r)? as usize;
            let b = read_u64(&mut r)? as usize;
            let arch = match tag {
                0 => Architecture::Mlp {
                    input_dim: a,
                    hidden_width: b,
                },
                _ => Architecture::Linear { input_dim: a },
            };
            let d = read_u64(&mut r)? as usize;
            let n = read_u64(&mut r)? as usize;
            let lambda = F::from_f64(read_f64(&mut r)?).unwrap();
            let min_eig = F::from_f64(read_f64(&mut r)?).unwrap();
            let mut theta = vec![F::zero(); d];
            for t in &mut theta {
                *t = F::from_f64(read_f64(&mut r)?).unwrap();
            }
            let loss = read_mat::<_, F>(&mut r, d, n)?;
            let influence = read_mat::<_, F>(&mut r, d, n)?;
            let lower = read_mat::<_, F>(&mut r, d, d)?;
            Ok((arch, theta, loss, influence, lower, lambda, min_eig, n))
        })();
        let (arch, theta, loss, influence, lower, lambda, min_eig, n) =
            inner.map_err(|e| io_err(path, e))?;
        let theta_hat = ParamVector::new(theta)
            .map_err(|_| AuditError::PersistFormat("non-finite parameters".to_string()))?;
        if !loss.is_finite() || !influence.is_finite() || !lower.is_finite() {
            return Err(AuditError::PersistFormat(
                "non-finite matrix entries".to_string(),
            ));
        }
        let ctx = AuditContext {
            arch,
            theta_hat,
            loss_gradients: LossGradientMatrix::from_mat(loss),
            lambda,
            min_hessian_eigenvalue: min_eig,
            factor: CholeskyFactor::from_lower(lower),
            influence,
            n,
        };
        if ctx.theta_hat.len() != ctx.arch.param_count() {
            return Err(AuditError::PersistFormat(format!(
                "parameter count {} does not match architecture ({})",
                ctx.theta_hat.len(),
                ctx.arch.param_count()
            )));
        }
        Ok(ctx)
    }
}
