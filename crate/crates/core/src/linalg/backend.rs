//! Dense factorizations backed by `faer`, instantiated for `f32` and `f64`.
//!
//! faer is built without its rayon feature, so every kernel runs sequentially
//! and results are bit-reproducible regardless of how many realizations run
//! side by side.

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, MatRef, Side};
use num_complex::Complex;

use super::{ComplexMatrix, SvdResult};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-scalar access to dense LAPACK-style kernels.
pub trait DenseBackend: Sized {
    fn dense_matmul(a: &ComplexMatrix<Self>, b: &ComplexMatrix<Self>) -> ComplexMatrix<Self>;
    /// Thin SVD with singular values in non-increasing order.
    fn dense_svd(m: &ComplexMatrix<Self>) -> Result<SvdResult<Self>>;
    fn dense_eig(
        m: &ComplexMatrix<Self>,
        want_vectors: bool,
    ) -> Result<(Vec<Complex<Self>>, Option<ComplexMatrix<Self>>)>;
    /// Hermitian eigendecomposition, eigenvalues ascending.
    fn dense_eigh(m: &ComplexMatrix<Self>) -> Result<(Vec<Self>, ComplexMatrix<Self>)>;
    /// Thin QR: `Q` is `m x min(m, n)`, `R` is `min(m, n) x n`.
    fn dense_qr(m: &ComplexMatrix<Self>) -> (ComplexMatrix<Self>, ComplexMatrix<Self>);
    fn dense_inverse(m: &ComplexMatrix<Self>) -> ComplexMatrix<Self>;
}

macro_rules! impl_dense_backend {
    ($t:ty) => {
        impl DenseBackend for $t {
            fn dense_matmul(a: &ComplexMatrix<$t>, b: &ComplexMatrix<$t>) -> ComplexMatrix<$t> {
                let p = to_faer(a) * to_faer(b);
                from_faer(p.as_ref())
            }

            fn dense_svd(m: &ComplexMatrix<$t>) -> Result<SvdResult<$t>> {
                let svd = to_faer(m).thin_svd().map_err(|_| Error::NonConvergence {
                    op: "svd",
                    rows: m.rows(),
                    cols: m.cols(),
                })?;
                let s: Vec<$t> = svd.S().column_vector().iter().map(|z| z.re).collect();
                Ok(SvdResult {
                    u: from_faer(svd.U()),
                    s,
                    v: from_faer(svd.V()),
                })
            }

            fn dense_eig(
                m: &ComplexMatrix<$t>,
                want_vectors: bool,
            ) -> Result<(Vec<Complex<$t>>, Option<ComplexMatrix<$t>>)> {
                let fm = to_faer(m);
                let err = || Error::NonConvergence {
                    op: "eig",
                    rows: m.rows(),
                    cols: m.cols(),
                };
                if want_vectors {
                    let e = fm.eigen().map_err(|_| err())?;
                    let values = e.S().column_vector().iter().copied().collect();
                    Ok((values, Some(from_faer(e.U()))))
                } else {
                    let values = fm.eigenvalues().map_err(|_| err())?;
                    Ok((values, None))
                }
            }

            fn dense_eigh(m: &ComplexMatrix<$t>) -> Result<(Vec<$t>, ComplexMatrix<$t>)> {
                let e = to_faer(m).self_adjoint_eigen(Side::Lower).map_err(|_| {
                    Error::NonConvergence {
                        op: "eigh",
                        rows: m.rows(),
                        cols: m.cols(),
                    }
                })?;
                let values = e.S().column_vector().iter().map(|z| z.re).collect();
                Ok((values, from_faer(e.U())))
            }

            fn dense_qr(m: &ComplexMatrix<$t>) -> (ComplexMatrix<$t>, ComplexMatrix<$t>) {
                let qr = to_faer(m).qr();
                (from_faer(qr.compute_thin_Q().as_ref()), from_faer(qr.thin_R()))
            }

            fn dense_inverse(m: &ComplexMatrix<$t>) -> ComplexMatrix<$t> {
                let inv = to_faer(m).partial_piv_lu().inverse();
                from_faer(inv.as_ref())
            }
        }
    };
}

fn to_faer<T: Real>(m: &ComplexMatrix<T>) -> Mat<Complex<T>> {
    let cols = m.cols();
    let data = m.as_slice();
    Mat::from_fn(m.rows(), cols, |i, j| data[i * cols + j])
}

fn from_faer<T: Real>(m: MatRef<'_, Complex<T>>) -> ComplexMatrix<T> {
    let (rows, cols) = (m.nrows(), m.ncols());
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            data.push(m[(i, j)]);
        }
    }
    ComplexMatrix::from_vec_unchecked(rows, cols, data)
}

impl_dense_backend!(f32);
impl_dense_backend!(f64);
