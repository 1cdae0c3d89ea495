//! Dense statevector reference simulator for small chains.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{matmul, svd, ComplexMatrix};
use crate::mps::{born_outcome, STATEVECTOR_CAP};
use crate::scalar::{cone, czero, Real};

/// Amplitudes of an `n`-site pure state, site 0 most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T> {
    n: usize,
    d: usize,
    amps: Vec<Complex<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn zero_state(n: usize, d: usize) -> Result<Self> {
        let dim = checked_dim(n, d)?;
        let mut amps = vec![czero(); dim];
        amps[0] = cone();
        Ok(Self { n, d, amps })
    }

    pub fn from_amplitudes(n: usize, d: usize, amps: Vec<Complex<T>>) -> Result<Self> {
        if amps.len() != checked_dim(n, d)? {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for {n} sites of dimension {d}",
                amps.len()
            )));
        }
        Ok(Self { n, d, amps })
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    fn stride(&self, site: usize) -> usize {
        self.d.pow((self.n - 1 - site) as u32)
    }

    pub fn apply_two_site(&mut self, gate: &ComplexMatrix<T>, site: usize) -> Result<()> {
        let d = self.d;
        if site + 1 >= self.n || gate.shape() != (d * d, d * d) {
            return Err(Error::InvalidInput(format!("two-site gate at {site} on {} sites", self.n)));
        }
        let (s1, s2) = (self.stride(site), self.stride(site + 1));
        let mut local = vec![czero::<T>(); d * d];
        for base in 0..self.amps.len() {
            if (base / s1) % d != 0 || (base / s2) % d != 0 {
                continue;
            }
            for a in 0..d {
                for b in 0..d {
                    local[a * d + b] = self.amps[base + a * s1 + b * s2];
                }
            }
            for a in 0..d {
                for b in 0..d {
                    self.amps[base + a * s1 + b * s2] = gate
                        .row(a * d + b)
                        .iter()
                        .zip(&local)
                        .map(|(&g, &x)| g * x)
                        .sum();
                }
            }
        }
        Ok(())
    }

    pub fn probabilities(&self, site: usize) -> Vec<T> {
        let s = self.stride(site);
        let mut p = vec![T::zero(); self.d];
        for (i, z) in self.amps.iter().enumerate() {
            p[(i / s) % self.d] += z.norm_sqr();
        }
        p
    }

    /// Computational-basis measurement with the same outcome rule as the MPS.
    pub fn measure_with(&mut self, site: usize, u: f64) -> usize {
        let p = self.probabilities(site);
        let outcome = born_outcome(&p, u);
        let scale = T::one() / p[outcome].sqrt();
        let s = self.stride(site);
        for (i, z) in self.amps.iter_mut().enumerate() {
            if (i / s) % self.d == outcome {
                *z = *z * scale;
            } else {
                *z = czero();
            }
        }
        outcome
    }

    /// Schmidt values across `cut` (sites `[0, cut)` versus the rest).
    pub fn schmidt_values(&self, cut: usize) -> Result<Vec<T>> {
        let rows = self.d.pow(cut as u32);
        let cols = self.amps.len() / rows;
        let m = ComplexMatrix::from_vec(rows, cols, self.amps.clone())?;
        Ok(svd(&m)?.s)
    }

    /// Reduced density matrix of `sites` (sorted, distinct), basis ordered
    /// with the first listed site most significant.
    pub fn reduced_density_matrix(&self, sites: &[usize]) -> Result<ComplexMatrix<T>> {
        if sites.windows(2).any(|w| w[0] >= w[1]) || sites.iter().any(|&s| s >= self.n) {
            return Err(Error::InvalidInput(format!("bad site list {sites:?}")));
        }
        let keep = sites.len();
        let dk = self.d.pow(keep as u32);
        let rest = self.amps.len() / dk;
        let strides: Vec<usize> = (0..self.n).map(|s| self.stride(s)).collect();
        let others: Vec<usize> = (0..self.n).filter(|s| !sites.contains(s)).collect();
        let digits_to_index = |list: &[usize], mut code: usize| {
            let mut idx = 0;
            for &s in list.iter().rev() {
                idx += (code % self.d) * strides[s];
                code /= self.d;
            }
            idx
        };
        // psi[(kept), (traced)]
        let psi = ComplexMatrix::from_fn(dk, rest, |a, b| {
            self.amps[digits_to_index(sites, a) + digits_to_index(&others, b)]
        });
        matmul(&psi, &psi.adjoint())
    }

    /// `Tr ρ_X^k` for the reduced state on `sites`.
    pub fn renyi_trace(&self, sites: &[usize], k: u32) -> Result<T> {
        if sites.is_empty() {
            return Ok(self.norm_sqr().powi(k as i32));
        }
        let rho = self.reduced_density_matrix(sites)?;
        let mut acc = rho.clone();
        for _ in 1..k {
            acc = matmul(&acc, &rho)?;
        }
        Ok(acc.trace().re)
    }
}

fn checked_dim(n: usize, d: usize) -> Result<usize> {
    d.checked_pow(n as u32)
        .filter(|&x| x <= STATEVECTOR_CAP)
        .ok_or(Error::AboveCap {
            dim: usize::MAX,
            cap: STATEVECTOR_CAP,
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn bell_pair_traces() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let sv = StateVector::from_amplitudes(2, 2, vec![c(h, 0.0), czero(), czero(), c(h, 0.0)]).unwrap();
        assert!((sv.renyi_trace(&[0], 2).unwrap() - 0.5).abs() < 1e-14);
        assert!((sv.renyi_trace(&[0, 1], 2).unwrap() - 1.0).abs() < 1e-14);
        let s = sv.schmidt_values(1).unwrap();
        assert!((s[0] - h).abs() < 1e-14 && (s[1] - h).abs() < 1e-14);
    }

    #[test]
    fn measurement_projects() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut sv = StateVector::from_amplitudes(2, 2, vec![c(h, 0.0), czero(), czero(), c(h, 0.0)]).unwrap();
        let out = sv.measure_with(1, 0.75);
        assert_eq!(out, 1);
        assert!((sv.amplitudes()[3].re - 1.0).abs() < 1e-14);
    }
}
