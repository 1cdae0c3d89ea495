//! Haar averages of replicated RMPS transfer operators via Weingarten
//! calculus, working in the `k!`-dimensional permutation basis.
//!
//! Basis vectors on a bond of size `χ` are `|σ⟩[a, b] = Π_m δ(b_m, a_σ(m))`
//! in the replica pair order of [`crate::replica`]. For an RMPS site with a
//! `dχ_r`-dimensional unitary,
//! `E 𝒯_α |π⟩ = Σ_σ T̃_α[σ, π] |σ⟩` with
//! `T̃_α[σ, π] = Σ_τ Wg(σ⁻¹τ, dχ_r) d^{#cyc(α τ)} χ_r^{#cyc(τ⁻¹π)}`.

use std::fmt::Debug;

use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{Num, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_general, inverse, ComplexMatrix};
use crate::perm::Permutation;

/// Exact or floating field used for Weingarten arithmetic.
pub trait Field: Clone + Debug + PartialEq + Num + ToPrimitive {
    fn from_count(n: u64) -> Self;
}

impl Field for f64 {
    fn from_count(n: u64) -> Self {
        n as f64
    }
}

impl Field for BigRational {
    fn from_count(n: u64) -> Self {
        BigRational::from_integer(n.into())
    }
}

fn pow<S: Field>(base: u64, e: usize) -> S {
    (0..e).fold(S::one(), |acc, _| acc * S::from_count(base))
}

/// Square matrix over a [`Field`] indexed by `Permutation::all(k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PermMatrix<S> {
    pub k: usize,
    pub perms: Vec<Permutation>,
    entries: Vec<S>,
}

impl<S: Field> PermMatrix<S> {
    fn from_fn(k: usize, mut f: impl FnMut(&Permutation, &Permutation) -> S) -> Self {
        let perms = Permutation::all(k);
        let entries = perms.iter().flat_map(|s| perms.iter().map(|p| f(s, p)).collect::<Vec<_>>()).collect();
        Self { k, perms, entries }
    }

    pub fn dim(&self) -> usize {
        self.perms.len()
    }

    pub fn get(&self, i: usize, j: usize) -> &S {
        &self.entries[i * self.dim() + j]
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.dim();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = S::zero();
                for t in 0..n {
                    acc = acc + self.get(i, t).clone() * other.get(t, j).clone();
                }
                entries.push(acc);
            }
        }
        Self {
            k: self.k,
            perms: self.perms.clone(),
            entries,
        }
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|i| {
            (0..n).all(|j| {
                let target = if i == j { 1.0 } else { 0.0 };
                let x = self.get(i, j).to_f64().unwrap_or(f64::NAN);
                (x - target).abs() <= tol
            })
        })
    }

    pub fn to_complex(&self) -> ComplexMatrix<f64> {
        let n = self.dim();
        ComplexMatrix::from_fn(n, n, |i, j| Complex::new(self.get(i, j).to_f64().unwrap_or(f64::NAN), 0.0))
    }

    /// Gauss-Jordan inverse with largest-magnitude pivoting.
    fn inverse(&self) -> Result<Self> {
        let n = self.dim();
        let mut a: Vec<Vec<S>> = (0..n).map(|i| (0..n).map(|j| self.get(i, j).clone()).collect()).collect();
        let mut inv: Vec<Vec<S>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { S::one() } else { S::zero() }).collect())
            .collect();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| {
                    let mx = a[x][col].to_f64().unwrap_or(0.0).abs();
                    let my = a[y][col].to_f64().unwrap_or(0.0).abs();
                    mx.total_cmp(&my)
                })
                .expect("nonempty range");
            if a[pivot][col].is_zero() {
                return Err(Error::Singular("permutation Gram matrix".into()));
            }
            a.swap(col, pivot);
            inv.swap(col, pivot);
            let p = a[col][col].clone();
            for j in 0..n {
                a[col][j] = a[col][j].clone() / p.clone();
                inv[col][j] = inv[col][j].clone() / p.clone();
            }
            for i in 0..n {
                if i == col || a[i][col].is_zero() {
                    continue;
                }
                let f = a[i][col].clone();
                for j in 0..n {
                    a[i][j] = a[i][j].clone() - f.clone() * a[col][j].clone();
                    inv[i][j] = inv[i][j].clone() - f.clone() * inv[col][j].clone();
                }
            }
        }
        Ok(Self {
            k: self.k,
            perms: self.perms.clone(),
            entries: inv.into_iter().flatten().collect(),
        })
    }
}

/// `G[σ, π] = D^{#cyc(σ⁻¹π)}`.
pub fn gram_matrix<S: Field>(k: usize, dim: usize) -> PermMatrix<S> {
    PermMatrix::from_fn(k, |s, p| pow(dim as u64, s.inverse().compose(p).num_cycles()))
}

/// `W[σ, π] = Wg(σ⁻¹π, D)`, the inverse of the Gram matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct WeingartenMatrix<S> {
    pub dim: usize,
    pub matrix: PermMatrix<S>,
}

impl<S: Field> WeingartenMatrix<S> {
    pub fn k(&self) -> usize {
        self.matrix.k
    }

    /// `Wg(σ, D)` looked up through the row of the identity.
    pub fn wg(&self, sigma: &Permutation) -> S {
        let j = self.matrix.perms.iter().position(|p| p == sigma).expect("permutation of matching size");
        self.matrix.get(0, j).clone()
    }
}

pub fn weingarten_matrix<S: Field>(k: usize, dim: usize) -> Result<WeingartenMatrix<S>> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    if dim < k {
        return Err(Error::InvalidInput(format!(
            "Gram matrix singular for D = {dim} < k = {k}"
        )));
    }
    Ok(WeingartenMatrix {
        dim,
        matrix: gram_matrix::<S>(k, dim).inverse()?,
    })
}

/// `E[Π_m U[i_m, j_m] conj(U[i'_m, j'_m])]` over the Haar measure on `U(D)`.
pub fn haar_moment<S: Field>(w: &WeingartenMatrix<S>, i: &[usize], j: &[usize], ip: &[usize], jp: &[usize]) -> S {
    let mut acc = S::zero();
    for s in &w.matrix.perms {
        if !(0..i.len()).all(|m| i[m] == ip[s.apply(m)]) {
            continue;
        }
        for t in &w.matrix.perms {
            if (0..j.len()).all(|m| j[m] == jp[t.apply(m)]) {
                acc = acc + w.wg(&s.inverse().compose(t));
            }
        }
    }
    acc
}

/// Averaged replicated RMPS operator in the permutation basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedReplicaTM<S> {
    pub d: usize,
    pub chi_left: usize,
    pub chi_right: usize,
    pub alpha: Permutation,
    pub matrix: PermMatrix<S>,
}

impl<S: Field> ShiftedReplicaTM<S> {
    pub fn k(&self) -> usize {
        self.matrix.k
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// `T̃_α` for a site whose unitary has dimension `d χ_r`.
pub fn shifted_tm<S: Field>(k: usize, d: usize, chi_left: usize, chi_right: usize, alpha: &Permutation) -> Result<ShiftedReplicaTM<S>> {
    if alpha.len() != k {
        return Err(Error::DimensionMismatch(format!("permutation on {} elements for k = {k}", alpha.len())));
    }
    if chi_left > d * chi_right {
        return Err(Error::InvalidInput(format!(
            "left bond {chi_left} exceeds unitary dimension {}",
            d * chi_right
        )));
    }
    let w = weingarten_matrix::<S>(k, d * chi_right)?;
    let phys = PermMatrix::from_fn(k, |s, t| {
        w.wg(&s.inverse().compose(t)) * pow::<S>(d as u64, alpha.compose(t).num_cycles())
    });
    let overlap = gram_matrix::<S>(k, chi_right);
    Ok(ShiftedReplicaTM {
        d,
        chi_left,
        chi_right,
        alpha: alpha.clone(),
        matrix: phys.mul(&overlap),
    })
}

/// The pair `(T̃_e, T̃_{C_k})` for a uniform RMPS of bond dimension `χ`.
#[derive(Clone, Debug, PartialEq)]
pub struct AveragedPair<S> {
    pub identity: ShiftedReplicaTM<S>,
    pub cyclic: ShiftedReplicaTM<S>,
}

pub fn averaged_replica_tm<S: Field>(k: usize, d: usize, chi: usize) -> Result<AveragedPair<S>> {
    if d * chi < k {
        return Err(Error::InvalidInput(format!("d χ = {} below k = {k}", d * chi)));
    }
    Ok(AveragedPair {
        identity: shifted_tm(k, d, chi, chi, &Permutation::identity(k))?,
        cyclic: shifted_tm(k, d, chi, chi, &Permutation::cyclic(k))?,
    })
}

fn closest_to_one(values: &[Complex<f64>]) -> usize {
    let one = Complex::new(1.0, 0.0);
    values
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - one).norm().total_cmp(&(b.1 - one).norm()))
        .map(|(i, _)| i)
        .expect("nonempty")
}

/// Row eigenvector of `T̃_e` at eigenvalue 1.
fn left_boundary(identity: &ComplexMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let e = eig_general(&identity.transpose(), true)?;
    let lead = closest_to_one(&e.values);
    Ok(e.vectors.expect("vectors requested").column(lead))
}

/// Averaged `I_k` of an infinite RMPS across a gap of `r` sites, from the
/// eigen-expansion over the spectrum of `T̃_{C_k}`.
pub fn rmps_averaged_ik(k: usize, d: usize, chi: usize, r: usize) -> Result<f64> {
    let pair = averaged_replica_tm::<f64>(k, d, chi)?;
    rmps_ik_from_pair(&pair, r)
}

/// Same as [`rmps_averaged_ik`] for a precomputed pair.
pub fn rmps_ik_from_pair(pair: &AveragedPair<f64>, r: usize) -> Result<f64> {
    let k = pair.identity.k();
    let n = pair.identity.dim();
    let l = left_boundary(&pair.identity.matrix.to_complex())?;
    let mut right = vec![Complex::new(0.0, 0.0); n];
    right[0] = Complex::new(1.0, 0.0);
    let e = eig_general(&pair.cyclic.matrix.to_complex(), true)?;
    let rv = e.vectors.expect("vectors requested");
    let lv = inverse(&rv)?;
    let lead = closest_to_one(&e.values);
    let dot = |u: &[Complex<f64>], v: &[Complex<f64>]| -> Complex<f64> { u.iter().zip(v).map(|(x, y)| x * y).sum() };
    let overlap = |m: usize| dot(&l, &rv.column(m)) * dot(lv.row(m), &right);
    let norm = overlap(lead);
    let mut sum = Complex::new(1.0, 0.0);
    for m in 0..n {
        if m != lead {
            sum += e.values[m].powu(r as u32) * overlap(m) / norm;
        }
    }
    Ok(sum.re.ln() / (k as f64 - 1.0))
}

/// Large-`χ` closed form `log[1 + d^{−r} (χ d / (d + 1))²]` for `k = 2`.
pub fn rmps_i2_asymptote(d: usize, chi: usize, r: usize) -> f64 {
    let d = d as f64;
    let x = chi as f64 * d / (d + 1.0);
    (1.0 + d.powi(-(r as i32)) * x * x).ln()
}

/// Exact `E Tr ρ_X^k` over a finite open RMPS chain of `n` sites; `mask`
/// marks `X`.
pub fn rmps_exact_replica_trace<S: Field>(n: usize, chi: usize, d: usize, k: usize, mask: &[bool]) -> Result<S> {
    if mask.len() != n || n == 0 {
        return Err(Error::InvalidInput("mask must cover the chain".into()));
    }
    let bond = |i: usize| -> usize {
        let edge = i.min(n - i) as u32;
        d.checked_pow(edge).map_or(chi, |x| x.min(chi))
    };
    let id = Permutation::identity(k);
    let cyc = Permutation::cyclic(k);
    let dim = Permutation::all(k).len();
    let mut v: Vec<S> = (0..dim).map(|i| if i == 0 { S::one() } else { S::zero() }).collect();
    for i in (0..n).rev() {
        let t = shifted_tm::<S>(k, d, bond(i), bond(i + 1), if mask[i] { &cyc } else { &id })?;
        v = (0..dim)
            .map(|s| (0..dim).fold(S::zero(), |acc, p| acc + t.matrix.get(s, p).clone() * v[p].clone()))
            .collect();
    }
    Ok(v.into_iter().fold(S::zero(), |a, b| a + b))
}

/// `∂I_k/∂log χ` at one grid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopePoint {
    pub chi: usize,
    pub slope: f64,
}

/// Centered differences of `I_k` in `log χ` over an increasing grid.
pub fn ik_slope_scan(k: usize, d: usize, chis: &[usize], r: usize) -> Result<Vec<SlopePoint>> {
    let values: Vec<f64> = chis.iter().map(|&c| rmps_averaged_ik(k, d, c, r)).collect::<Result<_>>()?;
    slopes_in_log(chis, &values)
}

/// Centered finite-difference slope of `y` against `log x`.
pub fn slopes_in_log(chis: &[usize], values: &[f64]) -> Result<Vec<SlopePoint>> {
    if chis.len() < 3 || chis.len() != values.len() {
        return Err(Error::InvalidInput("slope scan needs at least three grid points".into()));
    }
    if chis.windows(2).any(|w| w[0] >= w[1]) || chis[0] == 0 {
        return Err(Error::InvalidInput("χ grid must be positive and increasing".into()));
    }
    Ok((1..chis.len() - 1)
        .map(|i| SlopePoint {
            chi: chis[i],
            slope: (values[i + 1] - values[i - 1]) / ((chis[i + 1] as f64).ln() - (chis[i - 1] as f64).ln()),
        })
        .collect())
}
