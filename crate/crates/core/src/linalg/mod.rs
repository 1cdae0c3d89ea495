//! Dense complex linear algebra.
//!
//! Kronecker convention (fixed repo-wide): for `a` of shape `m x n` and `b`
//! of shape `p x q`,
//! `kron(a, b)[(i * p + k, j * q + l)] = a[(i, j)] * b[(k, l)]`.
//! With row-major vectorization `vec(X)[a * q + b] = X[(a, b)]` this gives
//! `kron(a, b) vec(X) = vec(a X b^T)`.

mod backend;
mod matrix;

pub use backend::DenseBackend;
pub use matrix::ComplexMatrix;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{czero, Real};

/// Numerical tolerances shared by the dense kernels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative Frobenius error allowed when reconstructing a factorization.
    pub reconstruction: f64,
    /// Max entry deviation of `U†U` from the identity.
    pub unitarity: f64,
    /// Eigenpair residual `‖Mv − λv‖` relative to `‖M‖`.
    pub eig_residual: f64,
    /// Largest matrix dimension handed to the dense eigensolver.
    pub dense_cap: usize,
    /// Largest row or column count produced by [`kron`].
    pub kron_cap: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            reconstruction: 1e-10,
            unitarity: 1e-12,
            eig_residual: 1e-8,
            dense_cap: 4096,
            kron_cap: 1 << 16,
        }
    }
}

/// Thin singular value decomposition `m = U diag(s) V†`.
#[derive(Clone, Debug)]
pub struct SvdResult<T> {
    pub u: ComplexMatrix<T>,
    /// Non-negative, non-increasing.
    pub s: Vec<T>,
    pub v: ComplexMatrix<T>,
}

impl<T: Real> SvdResult<T> {
    pub fn reconstruct(&self) -> ComplexMatrix<T> {
        let (m, k) = self.u.shape();
        let n = self.v.rows();
        ComplexMatrix::from_fn(m, n, |i, j| {
            (0..k)
                .map(|a| self.u[(i, a)] * self.v[(j, a)].conj() * self.s[a])
                .sum()
        })
    }
}

#[derive(Clone, Debug)]
pub struct EigResult<T> {
    pub values: Vec<Complex<T>>,
    /// Right eigenvectors as columns, in the order of `values`.
    pub vectors: Option<ComplexMatrix<T>>,
}

fn check_square<T: Real>(m: &ComplexMatrix<T>, op: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{op} needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )))
    }
}

/// Products below this many multiply-adds use a direct loop.
const SMALL_PRODUCT: usize = 1 << 12;

pub fn matmul<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    if a.cols() != b.rows() {
        return Err(Error::DimensionMismatch(format!(
            "matmul of {}x{} by {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    if a.rows() * a.cols() * b.cols() <= SMALL_PRODUCT {
        Ok(matmul_direct(a, b))
    } else {
        Ok(T::dense_matmul(a, b))
    }
}

fn matmul_direct<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let (m, inner, n) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![czero::<T>(); m * n];
    let (ad, bd) = (a.as_slice(), b.as_slice());
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for k in 0..inner {
            let aik = ad[i * inner + k];
            for (o, &bkj) in row.iter_mut().zip(&bd[k * n..(k + 1) * n]) {
                *o += aik * bkj;
            }
        }
    }
    ComplexMatrix::from_vec_unchecked(m, n, out)
}

pub fn kron<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    kron_with(a, b, &Tolerances::default())
}

pub fn kron_with<T: Real>(
    a: &ComplexMatrix<T>,
    b: &ComplexMatrix<T>,
    tol: &Tolerances,
) -> Result<ComplexMatrix<T>> {
    let (rows, cols) = (a.rows() * b.rows(), a.cols() * b.cols());
    let dim = rows.max(cols);
    if dim > tol.kron_cap {
        return Err(Error::AboveCap {
            dim,
            cap: tol.kron_cap,
        });
    }
    let (p, q) = b.shape();
    Ok(ComplexMatrix::from_fn(rows, cols, |r, c| {
        a[(r / p, c / q)] * b[(r % p, c % q)]
    }))
}

/// Thin SVD. Singular values come back sorted in descending order.
pub fn svd<T: Real>(m: &ComplexMatrix<T>) -> Result<SvdResult<T>> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::InvalidInput("svd of an empty matrix".into()));
    }
    let mut out = T::dense_svd(m)?;
    for s in &mut out.s {
        *s = s.max(T::zero());
    }
    debug_assert!(out.s.windows(2).all(|w| w[0] >= w[1]));
    Ok(out)
}

/// Thin QR factorization `m = Q R` without phase fixing.
pub fn qr_thin<T: Real>(m: &ComplexMatrix<T>) -> (ComplexMatrix<T>, ComplexMatrix<T>) {
    T::dense_qr(m)
}

/// Unitary factor of a square QR with the phases of `diag(R)` absorbed,
/// `Q diag(R_jj / |R_jj|)`. Applied to a Ginibre matrix this is Haar
/// distributed.
pub fn qr_unitary<T: Real>(m: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    check_square(m, "qr_unitary")?;
    let n = m.rows();
    if n == 0 {
        return Err(Error::InvalidInput("qr_unitary of an empty matrix".into()));
    }
    let (mut q, r) = T::dense_qr(m);
    let scale = m.max_abs();
    let floor = T::lit(1e-13) * scale * T::lit(n as f64);
    let mut phases = Vec::with_capacity(n);
    for j in 0..n {
        let rjj = r[(j, j)];
        let mag = rjj.norm();
        if !(mag > floor) {
            return Err(Error::Singular(format!(
                "rank deficient input to qr_unitary (|R[{j},{j}]| = {:.3e})",
                mag.as_f64()
            )));
        }
        phases.push(rjj / mag);
    }
    for i in 0..n {
        for (j, ph) in phases.iter().enumerate() {
            q[(i, j)] *= *ph;
        }
    }
    Ok(q)
}

pub fn eig_general<T: Real>(m: &ComplexMatrix<T>, want_vectors: bool) -> Result<EigResult<T>> {
    eig_general_with(m, want_vectors, &Tolerances::default())
}

/// Eigenvalues (and optionally right eigenvectors) of a general square
/// matrix. Eigenpair residuals are verified against `tol.eig_residual`.
pub fn eig_general_with<T: Real>(
    m: &ComplexMatrix<T>,
    want_vectors: bool,
    tol: &Tolerances,
) -> Result<EigResult<T>> {
    check_square(m, "eig_general")?;
    let n = m.rows();
    if n > tol.dense_cap {
        return Err(Error::AboveCap {
            dim: n,
            cap: tol.dense_cap,
        });
    }
    if n == 0 {
        return Ok(EigResult {
            values: Vec::new(),
            vectors: want_vectors.then(|| ComplexMatrix::zeros(0, 0)),
        });
    }
    let (values, vectors) = T::dense_eig(m, want_vectors)?;
    if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonConvergence {
            op: "eig",
            rows: n,
            cols: n,
        });
    }
    if let Some(v) = &vectors {
        let norm = m.frobenius_norm().as_f64().max(f64::MIN_POSITIVE);
        let mv = matmul(m, v)?;
        for (j, &lam) in values.iter().enumerate() {
            let col_norm = (0..n).map(|i| v[(i, j)].norm_sqr()).sum::<T>().sqrt();
            let res = (0..n)
                .map(|i| (mv[(i, j)] - v[(i, j)] * lam).norm_sqr())
                .sum::<T>()
                .sqrt();
            if res.as_f64() > tol.eig_residual * norm * col_norm.as_f64().max(1.0) {
                return Err(Error::NonConvergence {
                    op: "eig",
                    rows: n,
                    cols: n,
                });
            }
        }
    }
    Ok(EigResult { values, vectors })
}

/// Eigendecomposition of a Hermitian matrix (lower triangle is read).
/// Eigenvalues are ascending; eigenvectors are the columns of the matrix.
pub fn eigh<T: Real>(m: &ComplexMatrix<T>) -> Result<(Vec<T>, ComplexMatrix<T>)> {
    check_square(m, "eigh")?;
    if m.rows() == 0 {
        return Ok((Vec::new(), ComplexMatrix::zeros(0, 0)));
    }
    T::dense_eigh(m)
}

/// Inverse via partially pivoted LU.
pub fn inverse<T: Real>(m: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    check_square(m, "inverse")?;
    let inv = T::dense_inverse(m);
    if inv
        .as_slice()
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::Singular("matrix inverse".into()));
    }
    Ok(inv)
}

/// Max entry deviation of `U†U` from the identity, checked against
/// `tol.unitarity`-scaled bounds by callers.
pub fn unitarity_defect<T: Real>(u: &ComplexMatrix<T>) -> T {
    u.isometry_defect()
}
