use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::scalar::{cone, czero, Real};

/// Rank-3 site tensor `A[a, σ, b]` with shape `(left, d, right)`.
///
/// Storage is row-major over `(a, σ, b)`, so the `(left·d) × right` and
/// `left × (d·right)` reshapes are free.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3<T> {
    left: usize,
    d: usize,
    right: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> Tensor3<T> {
    pub fn zeros(left: usize, d: usize, right: usize) -> Self {
        Self {
            left,
            d,
            right,
            data: vec![czero(); left * d * right],
        }
    }

    pub fn from_vec(left: usize, d: usize, right: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != left * d * right {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a ({left}, {d}, {right}) tensor",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("tensor construction"));
        }
        Ok(Self { left, d, right, data })
    }

    pub fn from_fn(
        left: usize,
        d: usize,
        right: usize,
        mut f: impl FnMut(usize, usize, usize) -> Complex<T>,
    ) -> Self {
        let mut data = Vec::with_capacity(left * d * right);
        for a in 0..left {
            for s in 0..d {
                for b in 0..right {
                    data.push(f(a, s, b));
                }
            }
        }
        Self { left, d, right, data }
    }

    #[inline]
    pub fn left(&self) -> usize {
        self.left
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn right(&self) -> usize {
        self.right
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.left, self.d, self.right)
    }

    #[inline]
    pub fn get(&self, a: usize, s: usize, b: usize) -> Complex<T> {
        self.data[(a * self.d + s) * self.right + b]
    }

    #[inline]
    pub fn get_mut(&mut self, a: usize, s: usize, b: usize) -> &mut Complex<T> {
        &mut self.data[(a * self.d + s) * self.right + b]
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    /// The matrix `A^σ` of shape `left × right`.
    pub fn slice(&self, s: usize) -> ComplexMatrix<T> {
        ComplexMatrix::from_fn(self.left, self.right, |a, b| self.get(a, s, b))
    }

    /// `(left·d) × right` reshape.
    pub fn to_left_matrix(&self) -> ComplexMatrix<T> {
        ComplexMatrix::from_vec_unchecked(self.left * self.d, self.right, self.data.clone())
    }

    /// `left × (d·right)` reshape.
    pub fn to_right_matrix(&self) -> ComplexMatrix<T> {
        ComplexMatrix::from_vec_unchecked(self.left, self.d * self.right, self.data.clone())
    }

    pub fn from_left_matrix(m: ComplexMatrix<T>, d: usize) -> Self {
        let (rows, right) = m.shape();
        debug_assert_eq!(rows % d, 0);
        Self {
            left: rows / d,
            d,
            right,
            data: m.into_vec(),
        }
    }

    pub fn from_right_matrix(m: ComplexMatrix<T>, d: usize) -> Self {
        let (left, cols) = m.shape();
        debug_assert_eq!(cols % d, 0);
        Self {
            left,
            d,
            right: cols / d,
            data: m.into_vec(),
        }
    }

    pub fn scale(&mut self, s: Complex<T>) {
        for z in &mut self.data {
            *z *= s;
        }
    }

    pub fn norm_sqr(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Max deviation of `Σ_σ A^σ† A^σ` from the identity.
    pub fn left_isometry_defect(&self) -> T {
        self.to_left_matrix().isometry_defect()
    }

    /// Max deviation of `Σ_σ A^σ A^σ†` from the identity.
    pub fn right_isometry_defect(&self) -> T {
        self.to_right_matrix().adjoint().isometry_defect()
    }

    /// `M · A` on the left bond.
    pub fn contract_left(&self, m: &ComplexMatrix<T>) -> Self {
        debug_assert_eq!(m.cols(), self.left);
        let width = self.d * self.right;
        let mut data = vec![czero(); m.rows() * width];
        for i in 0..m.rows() {
            let row = &mut data[i * width..(i + 1) * width];
            for a in 0..self.left {
                let w = m[(i, a)];
                if w == czero() {
                    continue;
                }
                for (o, &x) in row.iter_mut().zip(&self.data[a * width..(a + 1) * width]) {
                    *o += w * x;
                }
            }
        }
        Self {
            left: m.rows(),
            d: self.d,
            right: self.right,
            data,
        }
    }

    /// `A · M` on the right bond.
    pub fn contract_right(&self, m: &ComplexMatrix<T>) -> Self {
        debug_assert_eq!(m.rows(), self.right);
        let new_right = m.cols();
        let rows = self.left * self.d;
        let mut data = vec![czero(); rows * new_right];
        for r in 0..rows {
            let out = &mut data[r * new_right..(r + 1) * new_right];
            for b in 0..self.right {
                let w = self.data[r * self.right + b];
                if w == czero() {
                    continue;
                }
                for (o, &x) in out.iter_mut().zip(m.row(b)) {
                    *o += w * x;
                }
            }
        }
        Self {
            left: self.left,
            d: self.d,
            right: new_right,
            data,
        }
    }

    /// Embeds the tensor into larger bonds, filling with zeros.
    pub fn padded(&self, left: usize, right: usize) -> Self {
        assert!(left >= self.left && right >= self.right);
        Self::from_fn(left, self.d, right, |a, s, b| {
            if a < self.left && b < self.right {
                self.get(a, s, b)
            } else {
                czero()
            }
        })
    }

    pub fn cast<U: Real>(&self) -> Tensor3<U> {
        Tensor3 {
            left: self.left,
            d: self.d,
            right: self.right,
            data: self
                .data
                .iter()
                .map(|z| Complex::new(U::lit(z.re.as_f64()), U::lit(z.im.as_f64())))
                .collect(),
        }
    }

    /// Product-state tensor with bond dimension 1.
    pub fn product(local: &[Complex<T>]) -> Self {
        Self {
            left: 1,
            d: local.len(),
            right: 1,
            data: local.to_vec(),
        }
    }

    /// Basis-state tensor `|σ⟩` with bond dimension 1.
    pub fn basis(d: usize, s: usize) -> Self {
        let mut t = Self::zeros(1, d, 1);
        t.data[s] = cone();
        t
    }
}
