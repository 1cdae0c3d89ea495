//! Transfer matrices and their spectral statistics.
//!
//! `T = Σ_σ conj(A^σ) ⊗ A^σ` acts on row-major `vec(X)` as
//! `T vec(X) = vec(Σ_σ conj(A^σ) X A^σᵀ)`. For a left-canonical tensor
//! `vec(I)` is a left fixed point with eigenvalue 1.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::circuits::CircuitSpec;
use crate::error::{Error, Result};
use crate::linalg::{eig_general_with, inverse, ComplexMatrix, Tolerances};
use crate::mps::uniform::{cp_fixed_point, right_map, FixedPointOptions};
use crate::mps::{MpsState, Tensor3};
use crate::scalar::{cone, czero, to_c64, Real};

/// Eigenvalues with `|λ| > 1 − UNIT_TOL` count as unit eigenvalues.
pub const UNIT_TOL: f64 = 1e-6;
pub const DEFAULT_BINS: usize = 100;

fn require_square_bonds<T: Real>(a: &Tensor3<T>) -> Result<usize> {
    if a.left() != a.right() {
        return Err(Error::DimensionMismatch(format!(
            "transfer matrix needs square bonds, got {}x{}",
            a.left(),
            a.right()
        )));
    }
    Ok(a.left())
}

/// Dense `χ² × χ²` transfer matrix, optionally with a local operator
/// inserted: `Σ_{σσ'} O[σ, σ'] conj(A^σ) ⊗ A^σ'`.
pub fn transfer_matrix_with<T: Real>(
    a: &Tensor3<T>,
    op: Option<&ComplexMatrix<T>>,
    tol: &Tolerances,
) -> Result<ComplexMatrix<T>> {
    let chi = require_square_bonds(a)?;
    let dim = chi * chi;
    if dim > tol.dense_cap {
        return Err(Error::AboveCap {
            dim,
            cap: tol.dense_cap,
        });
    }
    let d = a.d();
    let weight = |s: usize, t: usize| match op {
        Some(o) => o[(s, t)],
        None if s == t => cone(),
        None => czero(),
    };
    let mut out = ComplexMatrix::zeros(dim, dim);
    for s in 0..d {
        for t in 0..d {
            let w = weight(s, t);
            if w == czero() {
                continue;
            }
            for x in 0..chi {
                for xp in 0..chi {
                    let left = a.get(x, s, xp).conj() * w;
                    if left == czero() {
                        continue;
                    }
                    for y in 0..chi {
                        for yp in 0..chi {
                            out[(x * chi + y, xp * chi + yp)] += left * a.get(y, t, yp);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn transfer_matrix<T: Real>(a: &Tensor3<T>) -> Result<ComplexMatrix<T>> {
    transfer_matrix_with(a, None, &Tolerances::default())
}

/// `T vec(X)` without forming `T`: `Σ_σ conj(A^σ) X A^σᵀ`.
pub fn transfer_apply<T: Real>(a: &Tensor3<T>, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    transfer_apply_op(a, None, x)
}

pub fn transfer_apply_op<T: Real>(
    a: &Tensor3<T>,
    op: Option<&ComplexMatrix<T>>,
    x: &[Complex<T>],
) -> Result<Vec<Complex<T>>> {
    let chi = require_square_bonds(a)?;
    if x.len() != chi * chi {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} for bond dimension {chi}",
            x.len()
        )));
    }
    let d = a.d();
    let mut out = vec![czero::<T>(); chi * chi];
    // tmp[xp, y] = Σ_yp X[xp, yp] A[y, t, yp]
    let mut tmp = vec![czero::<T>(); chi * chi];
    for t in 0..d {
        tmp.fill(czero());
        for xp in 0..chi {
            for y in 0..chi {
                let mut acc = czero::<T>();
                for yp in 0..chi {
                    acc += x[xp * chi + yp] * a.get(y, t, yp);
                }
                tmp[xp * chi + y] = acc;
            }
        }
        for s in 0..d {
            let w = match op {
                Some(o) => o[(s, t)],
                None if s == t => cone(),
                None => continue,
            };
            if w == czero() {
                continue;
            }
            for xx in 0..chi {
                for xp in 0..chi {
                    let left = a.get(xx, s, xp).conj() * w;
                    if left == czero() {
                        continue;
                    }
                    for y in 0..chi {
                        out[xx * chi + y] += left * tmp[xp * chi + y];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Eigenvalues of one transfer matrix plus provenance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransferSpectrum {
    pub eigenvalues: Vec<Complex<f64>>,
    pub chi: usize,
    pub site: Option<usize>,
    pub spec: Option<CircuitSpec>,
    pub unit_eigenvalues_removed: bool,
    /// Eigenvalues found within `UNIT_TOL` of the unit circle.
    pub unit_count: usize,
}

impl TransferSpectrum {
    pub fn with_provenance(mut self, spec: &CircuitSpec, site: Option<usize>) -> Self {
        self.spec = Some(spec.clone());
        self.site = site;
        self
    }

    /// Eigenvalues strictly inside the unit disk (by `UNIT_TOL`).
    pub fn non_unit(&self) -> impl Iterator<Item = &Complex<f64>> {
        self.eigenvalues.iter().filter(|z| z.norm() <= 1.0 - UNIT_TOL)
    }
}

/// Full transfer spectrum of `a`; `remove_unit` drops `|λ| > 1 − UNIT_TOL`.
pub fn spectrum<T: Real>(a: &Tensor3<T>, remove_unit: bool) -> Result<TransferSpectrum> {
    spectrum_with(a, remove_unit, &Tolerances::default())
}

pub fn spectrum_with<T: Real>(a: &Tensor3<T>, remove_unit: bool, tol: &Tolerances) -> Result<TransferSpectrum> {
    let t = transfer_matrix_with(a, None, tol)?;
    let vals: Vec<Complex<f64>> = eig_general_with(&t, false, tol)?
        .values
        .into_iter()
        .map(to_c64)
        .collect();
    let unit_count = vals.iter().filter(|z| z.norm() > 1.0 - UNIT_TOL).count();
    let eigenvalues = if remove_unit {
        vals.into_iter().filter(|z| z.norm() <= 1.0 - UNIT_TOL).collect()
    } else {
        vals
    };
    Ok(TransferSpectrum {
        eigenvalues,
        chi: a.left(),
        site: None,
        spec: None,
        unit_eigenvalues_removed: remove_unit,
        unit_count,
    })
}

/// Spectrum of the Schmidt-gauge tensor at `site` of a finite chain.
pub fn site_spectrum<T: Real>(
    state: &MpsState<T>,
    site: usize,
    null_tol: f64,
    remove_unit: bool,
) -> Result<TransferSpectrum> {
    let a = state.schmidt_gauge_tensor(site, null_tol)?;
    let mut s = spectrum(&a, remove_unit)?;
    s.site = Some(site);
    Ok(s)
}

/// Radial histogram over `|λ| ∈ [0, 1]`, normalized as a density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialDensity {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    pub count: usize,
}

impl RadialDensity {
    pub fn bins(&self) -> usize {
        self.density.len()
    }

    pub fn integral(&self) -> f64 {
        self.density
            .iter()
            .zip(self.edges.windows(2))
            .map(|(rho, e)| rho * (e[1] - e[0]))
            .sum()
    }
}

/// Pools `|λ|` over spectra (unit eigenvalues excluded when the spectrum was
/// flagged for removal) into `bins` uniform bins on `[0, 1]`.
pub fn radial_density(spectra: &[TransferSpectrum], bins: usize) -> Result<RadialDensity> {
    if spectra.is_empty() || bins == 0 {
        return Err(Error::InvalidInput("radial density needs spectra and bins".into()));
    }
    let mut counts = vec![0usize; bins];
    let mut total = 0usize;
    for s in spectra {
        for z in &s.eigenvalues {
            let r = z.norm();
            let bin = ((r * bins as f64).floor() as usize).min(bins - 1);
            counts[bin] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::InvalidInput("no eigenvalues to bin".into()));
    }
    let width = 1.0 / bins as f64;
    Ok(RadialDensity {
        edges: (0..=bins).map(|i| i as f64 * width).collect(),
        density: counts
            .iter()
            .map(|&c| c as f64 / (total as f64 * width))
            .collect(),
        count: total,
    })
}

/// `a − b` per bin.
pub fn density_difference(a: &RadialDensity, b: &RadialDensity) -> Result<Vec<f64>> {
    if a.edges != b.edges {
        return Err(Error::DimensionMismatch("densities use different binning".into()));
    }
    Ok(a.density.iter().zip(&b.density).map(|(x, y)| x - y).collect())
}

/// Fraction of pooled non-unit eigenvalues with `|λ| < ρ`.
pub fn small_eig_fraction(spectra: &[TransferSpectrum], rho: f64) -> Result<f64> {
    let (hits, total) = small_eig_counts(spectra, rho)?;
    Ok(if total == 0 { 0.0 } else { hits as f64 / total as f64 })
}

/// `(count with |λ| < ρ, pooled non-unit count)`.
pub fn small_eig_counts(spectra: &[TransferSpectrum], rho: f64) -> Result<(usize, usize)> {
    if spectra.is_empty() {
        return Err(Error::InvalidInput("no spectra".into()));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidInput(format!("rho = {rho} outside (0, 1]")));
    }
    let mut hits = 0;
    let mut total = 0;
    for s in spectra {
        for z in s.non_unit() {
            total += 1;
            if z.norm() < rho {
                hits += 1;
            }
        }
    }
    Ok((hits, total))
}

/// `(1 − |λ_max|, −1/log|λ_max|)` with `λ_max` the largest-modulus
/// eigenvalue after removing the one closest to 1; `ξ = 0` when
/// `λ_max = 0`.
pub fn spectral_gap(eigenvalues: &[Complex<f64>]) -> Result<(f64, f64)> {
    if eigenvalues.len() < 2 {
        return Err(Error::InvalidInput("spectral gap needs at least two eigenvalues".into()));
    }
    let one = Complex::new(1.0, 0.0);
    let lead = eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - one).norm().total_cmp(&(b.1 - one).norm()))
        .map(|(i, _)| i)
        .expect("nonempty");
    let lmax = eigenvalues
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != lead)
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max);
    let xi = if lmax == 0.0 { 0.0 } else { -1.0 / lmax.ln() };
    Ok((1.0 - lmax, xi))
}

/// Connected two-point function evaluated along both routes.
#[derive(Clone, Copy, Debug)]
pub struct CorrelatorPaths {
    /// Eigen-expansion route (absent above the dense cap).
    pub eigen: Option<Complex<f64>>,
    /// Direct repeated transfer application.
    pub direct: Complex<f64>,
}

/// `⟨O_i O_{i+r+1}⟩ − ⟨O⟩²` on a canonical one-site uniform state.
pub fn connected_correlator<T: Real>(
    state: &MpsState<T>,
    op: &ComplexMatrix<T>,
    r: usize,
) -> Result<CorrelatorPaths> {
    connected_correlator_with(state, op, r, &Tolerances::default())
}

pub fn connected_correlator_with<T: Real>(
    state: &MpsState<T>,
    op: &ComplexMatrix<T>,
    r: usize,
    tol: &Tolerances,
) -> Result<CorrelatorPaths> {
    if !state.is_uniform() || state.len() != 1 {
        return Err(Error::InvalidInput("correlator needs a one-site uniform cell".into()));
    }
    let a = state.tensor(0);
    let chi = require_square_bonds(a)?;
    if op.shape() != (a.d(), a.d()) {
        return Err(Error::DimensionMismatch("local operator has the wrong size".into()));
    }
    // Boundary vectors: l = vec(I); r = vec(conj ρ) with ρ the fixed point
    // of X ↦ Σ A X A†, scaled so that ⟨l|r⟩ = 1.
    let (rho, _) = cp_fixed_point(ComplexMatrix::identity(chi), |x| right_map(a, x), &FixedPointOptions::default())?;
    let rvec: Vec<Complex<T>> = rho.conj().into_vec();
    let lvec: Vec<Complex<T>> = ComplexMatrix::<T>::identity(chi).into_vec();
    let dot = |u: &[Complex<T>], v: &[Complex<T>]| -> Complex<f64> { to_c64(u.iter().zip(v).map(|(&x, &y)| x * y).sum()) };
    let norm = dot(&lvec, &rvec);

    let b = transfer_apply_op(a, Some(op), &rvec)?;
    let mut chain = b.clone();
    for _ in 0..r {
        chain = transfer_apply(a, &chain)?;
    }
    let chain = transfer_apply_op(a, Some(op), &chain)?;
    let expect = dot(&lvec, &b) / norm;
    let direct = dot(&lvec, &chain) / norm - expect * expect;

    let eigen = if chi * chi <= tol.dense_cap {
        let t = transfer_matrix_with(a, None, tol)?;
        let t_op = transfer_matrix_with(a, Some(op), tol)?;
        let e = eig_general_with(&t, true, tol)?;
        let rv = e.vectors.expect("vectors requested");
        let lv = inverse(&rv)?;
        let one = Complex::new(1.0, 0.0);
        let lead = e
            .values
            .iter()
            .map(|&z| (to_c64(z) - one).norm())
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .map(|(i, _)| i)
            .expect("nonempty");
        let left_op: Vec<Complex<T>> = (0..chi * chi)
            .map(|j| (0..chi * chi).map(|i| lvec[i] * t_op[(i, j)]).sum())
            .collect();
        let mut acc = Complex::new(0.0, 0.0);
        for m in 0..chi * chi {
            if m == lead {
                continue;
            }
            let lam = to_c64(e.values[m]);
            let w1 = dot(&left_op, &rv.column(m));
            let w2 = dot(lv.row(m), &b);
            acc += lam.powu(r as u32) * w1 * w2;
        }
        Some(acc / norm)
    } else {
        None
    };
    Ok(CorrelatorPaths { eigen, direct })
}

#[cfg(test)]
mod tests;
