//! Gauge fixing of translation-invariant (uniform) MPS unit cells.
//!
//! The canonical form produced here is left-canonical with every bond in
//! its Schmidt basis (the right fixed point is diagonal, descending) and
//! null Schmidt directions set exactly to zero.

use num_complex::Complex;

use super::{MpsState, Tensor3};
use crate::error::{Error, Result};
use crate::linalg::{eigh, matmul, ComplexMatrix};
use crate::scalar::{czero, Real};

/// Iteration controls for fixed-point searches.
#[derive(Clone, Copy, Debug)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub null_tol: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            max_iter: 200_000,
            null_tol: super::DEFAULT_NULL_TOL,
        }
    }
}

/// Canonical uniform cell.
#[derive(Clone, Debug)]
pub struct UniformCanonical<T> {
    pub state: MpsState<T>,
    /// Schmidt values on the bond to the left of each cell site.
    pub schmidt: Vec<Vec<T>>,
    /// Leading eigenvalue of the cell transfer operator before rescaling.
    pub eta: f64,
}

/// `X ↦ Σ_σ A^σ† X A^σ`.
pub fn left_map<T: Real>(a: &Tensor3<T>, x: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    let mut out = ComplexMatrix::zeros(a.right(), a.right());
    for s in 0..a.d() {
        let m = a.slice(s);
        out = out.add(&matmul(&matmul(&m.adjoint(), x)?, &m)?)?;
    }
    Ok(out)
}

/// `X ↦ Σ_σ A^σ X A^σ†`.
pub fn right_map<T: Real>(a: &Tensor3<T>, x: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    let mut out = ComplexMatrix::zeros(a.left(), a.left());
    for s in 0..a.d() {
        let m = a.slice(s);
        out = out.add(&matmul(&matmul(&m, x)?, &m.adjoint())?)?;
    }
    Ok(out)
}

fn hermitize<T: Real>(x: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let half = Complex::new(T::lit(0.5), T::zero());
    x.add(&x.adjoint()).expect("square").scale(half)
}

/// Power iteration for the dominant positive fixed point of a completely
/// positive map. Returns the fixed point (unit trace) and its eigenvalue.
pub fn cp_fixed_point<T: Real>(
    start: ComplexMatrix<T>,
    mut map: impl FnMut(&ComplexMatrix<T>) -> Result<ComplexMatrix<T>>,
    opts: &FixedPointOptions,
) -> Result<(ComplexMatrix<T>, T)> {
    let n = start.rows();
    let mut x = start.scale(Complex::new(T::one() / start.trace().re, T::zero()));
    for _ in 0..opts.max_iter {
        let y = hermitize(&map(&x)?);
        let eta = y.trace().re;
        if !(eta > T::zero()) || !eta.is_finite() {
            return Err(Error::NonFinite("transfer fixed point"));
        }
        let y = y.scale(Complex::new(T::one() / eta, T::zero()));
        let diff = y.sub(&x)?.max_abs();
        x = y;
        if diff.as_f64() < opts.tol {
            return Ok((x, eta));
        }
    }
    Err(Error::NonConvergence {
        op: "transfer fixed point",
        rows: n,
        cols: n,
    })
}

/// Canonicalizes a uniform cell (one or more sites, periodic bonds).
pub fn canonicalize_uniform<T: Real>(
    cell: &[Tensor3<T>],
    opts: &FixedPointOptions,
) -> Result<UniformCanonical<T>> {
    let c = cell.len();
    if c == 0 {
        return Err(Error::InvalidInput("empty unit cell".into()));
    }
    MpsState::from_tensors(cell.to_vec(), None, true)?;
    let chi0 = cell[0].left();

    let (_, eta) = cp_fixed_point(
        ComplexMatrix::identity(chi0),
        |x| cell.iter().try_fold(x.clone(), |acc, a| left_map(a, &acc)),
        opts,
    )?;
    let scale = Complex::new(eta.powf(T::lit(-0.5 / c as f64)), T::zero());
    let mut tensors: Vec<Tensor3<T>> = cell
        .iter()
        .map(|a| {
            let mut a = a.clone();
            a.scale(scale);
            a
        })
        .collect();

    // Left gauge: ℓ_j = L_j† L_j on every bond, A_j ← L_j A_j L_{j+1}⁺.
    let (ell0, _) = cp_fixed_point(
        ComplexMatrix::identity(chi0),
        |x| tensors.iter().try_fold(x.clone(), |acc, a| left_map(a, &acc)),
        opts,
    )?;
    let mut ells = vec![ell0];
    for a in tensors.iter().take(c - 1) {
        let next = hermitize(&left_map(a, ells.last().expect("nonempty"))?);
        ells.push(next);
    }
    let factors: Vec<(ComplexMatrix<T>, ComplexMatrix<T>)> = ells
        .iter()
        .map(|l| sqrt_and_pinv(l, opts.null_tol))
        .collect::<Result<_>>()?;
    for j in 0..c {
        let (l, _) = &factors[j];
        let (_, linv) = &factors[(j + 1) % c];
        tensors[j] = tensors[j].contract_left(l).contract_right(linv);
    }

    // Schmidt rotation from the right fixed point.
    let chi_c = tensors[0].left();
    let (r0, _) = cp_fixed_point(
        ComplexMatrix::identity(chi_c),
        |x| tensors.iter().rev().try_fold(x.clone(), |acc, a| right_map(a, &acc)),
        opts,
    )?;
    let mut rights = vec![ComplexMatrix::zeros(0, 0); c];
    rights[0] = r0.clone();
    let mut cur = r0;
    for j in (1..c).rev() {
        cur = hermitize(&right_map(&tensors[j], &cur)?);
        rights[j] = cur.clone();
    }
    let mut rotations = Vec::with_capacity(c);
    let mut schmidt = Vec::with_capacity(c);
    for r in &rights {
        let (mut vals, vecs) = eigh(r)?;
        let n = vals.len();
        let tr: T = vals.iter().map(|&v| v.max(T::zero())).sum();
        vals.reverse();
        let s: Vec<T> = vals.iter().map(|&v| (v.max(T::zero()) / tr).sqrt()).collect();
        let v = ComplexMatrix::from_fn(n, n, |i, k| vecs[(i, n - 1 - k)]);
        rotations.push(v);
        schmidt.push(s);
    }
    for j in 0..c {
        let v_left = &rotations[j];
        let v_right = &rotations[(j + 1) % c];
        let mut a = tensors[j].contract_left(&v_left.adjoint()).contract_right(v_right);
        zero_null(&mut a, &schmidt[j], &schmidt[(j + 1) % c], opts.null_tol);
        tensors[j] = a;
    }
    Ok(UniformCanonical {
        state: MpsState::from_tensors(tensors, None, true)?,
        schmidt,
        eta: eta.as_f64(),
    })
}

/// For Hermitian PSD `ℓ = W diag(w) W†` returns `(diag(√w) W†, W diag(1/√w))`
/// with null eigenvalues dropped from the pseudo-inverse.
fn sqrt_and_pinv<T: Real>(
    ell: &ComplexMatrix<T>,
    null_tol: f64,
) -> Result<(ComplexMatrix<T>, ComplexMatrix<T>)> {
    let (w, v) = eigh(ell)?;
    let n = w.len();
    let wmax = w.iter().copied().fold(T::zero(), T::max);
    let floor = T::lit(null_tol * null_tol) * wmax;
    let root: Vec<T> = w.iter().map(|&x| x.max(T::zero()).sqrt()).collect();
    let l = ComplexMatrix::from_fn(n, n, |i, j| v[(j, i)].conj() * root[i]);
    let linv = ComplexMatrix::from_fn(n, n, |i, j| {
        if w[j] > floor {
            v[(i, j)] / root[j]
        } else {
            czero()
        }
    });
    Ok((l, linv))
}

fn zero_null<T: Real>(a: &mut Tensor3<T>, left: &[T], right: &[T], null_tol: f64) {
    let tol = T::lit(null_tol);
    let lmax = left.first().copied().unwrap_or(T::zero());
    let rmax = right.first().copied().unwrap_or(T::zero());
    let (l, d, r) = a.shape();
    for x in 0..l {
        for s in 0..d {
            for y in 0..r {
                if left[x] <= tol * lmax || right[y] <= tol * rmax {
                    *a.get_mut(x, s, y) = czero();
                }
            }
        }
    }
}
