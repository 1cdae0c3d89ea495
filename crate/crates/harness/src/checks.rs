//! Fast self-consistency checks between independent evaluation routes.

use num_complex::Complex;
use serde::Serialize;

use mps_ensembles_core::circuits::{rmps_tensor, run_statevector, run_uniform_ti, generate_finite, CircuitSpec, Family};
use mps_ensembles_core::linalg::{ComplexMatrix, Tolerances};
use mps_ensembles_core::perm::Permutation;
use mps_ensembles_core::replica::{renyi_mutual_info_ti_paths, ApplyMode, ReplicaOperator};
use mps_ensembles_core::rng::{complex_normal, substream, StreamRole};
use mps_ensembles_core::spectra::connected_correlator;
use mps_ensembles_core::weingarten::{gram_matrix, weingarten_matrix};
use mps_ensembles_core::Result;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    /// Largest deviation observed.
    pub deviation: f64,
    pub tolerance: f64,
    pub cases: usize,
}

impl Check {
    pub fn pass(&self) -> bool {
        self.deviation <= self.tolerance
    }
}

fn max_diff(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Brickwork, TI brickwork and monitored trajectories at `n ≤ 8` with an
/// uncapped bond against the dense statevector replay of the same streams.
pub fn statevector_equivalence(seed: u64, seeds: usize) -> Result<Check> {
    let mut dev = 0.0f64;
    let mut cases = 0;
    for s in 0..seeds as u64 {
        for (family, p, n) in [
            (Family::Brickwork, 0.0, 6),
            (Family::BrickworkTi, 0.0, 8),
            (Family::Monitored, 0.3, 8),
        ] {
            let spec = CircuitSpec::new(family, n, 2, 1 << (n / 2), 6, seed.wrapping_add(s)).with_p(p);
            let (mps, _) = generate_finite::<f64>(&spec)?;
            let (sv, _) = run_statevector::<f64>(&spec, &mut spec.rng())?;
            dev = dev.max(max_diff(&mps.to_statevector()?, sv.amplitudes()));
            cases += 1;
        }
    }
    Ok(Check { name: "statevector_oracle", deviation: dev, tolerance: 1e-10, cases })
}

/// Eigen-expansion against direct transfer application for the connected
/// `Z Z` correlator on canonical RMPS cells with `χ ≤ 10`.
pub fn correlator_paths(seed: u64) -> Result<Check> {
    let z = ComplexMatrix::<f64>::from_diag(&[Complex::new(1.0, 0.0), Complex::new(-1.0, 0.0)]);
    let mut dev = 0.0f64;
    let mut cases = 0;
    for chi in 2..=10 {
        let spec = CircuitSpec::uniform(Family::Rmps, 2, chi, 1, seed ^ chi as u64);
        let cell = run_uniform_ti::<f64>(&spec, &mut spec.rng())?;
        for r in [0, 1, 2, 5] {
            let paths = connected_correlator(&cell.state, &z, r)?;
            let eigen = paths.eigen.expect("small chi stays below the dense cap");
            dev = dev.max((eigen - paths.direct).norm());
            cases += 1;
        }
    }
    Ok(Check { name: "correlator_dual_path", deviation: dev, tolerance: 1e-8, cases })
}

/// Literal eigen-expansion of the uniform-state `I_2` against the trace
/// ratio, `χ = 2`.
pub fn ti_mutual_info_paths(seed: u64) -> Result<Check> {
    let mut rng = substream(seed, 1, StreamRole::Gates);
    let tol = Tolerances::default();
    let mut dev = 0.0f64;
    let mut cases = 0;
    for _ in 0..5 {
        let a = rmps_tensor::<f64, _>(2, 2, 2, &mut rng);
        for r in 0..6 {
            let p = renyi_mutual_info_ti_paths(&a, 2, r, &tol)?;
            dev = dev.max((p.literal.expect("within dense cap") - p.contraction).abs());
            cases += 1;
        }
    }
    Ok(Check { name: "ti_mutual_info_dual_path", deviation: dev, tolerance: 1e-8, cases })
}

/// Dense replicated transfer matrix against sequential contraction.
pub fn replica_modes(seed: u64) -> Result<Check> {
    let mut rng = substream(seed, 2, StreamRole::Gates);
    let tol = Tolerances::default();
    let mut dev = 0.0f64;
    let mut cases = 0;
    for (k, chi) in [(2, 2), (2, 3), (3, 2)] {
        let a = rmps_tensor::<f64, _>(chi, chi, 2, &mut rng);
        for alpha in [Permutation::identity(k), Permutation::cyclic(k)] {
            let dense = ReplicaOperator::new(&a, alpha.clone(), ApplyMode::Dense)?;
            let contr = ReplicaOperator::new(&a, alpha, ApplyMode::Contraction)?;
            let m = dense.dense(&tol)?;
            for _ in 0..10 {
                let v: Vec<Complex<f64>> = (0..m.cols()).map(|_| complex_normal(&mut rng)).collect();
                let direct: Vec<Complex<f64>> = (0..m.rows())
                    .map(|i| (0..m.cols()).map(|j| m[(i, j)] * v[j]).sum())
                    .collect();
                dev = dev.max(max_diff(&direct, &contr.apply(&v)?));
                cases += 1;
            }
        }
    }
    Ok(Check { name: "replica_dense_vs_contraction", deviation: dev, tolerance: 1e-10, cases })
}

/// `W · G = I` for `k ≤ 4`, `D ∈ {4, 8, 16}`.
pub fn weingarten_inverse() -> Result<Check> {
    let mut dev = 0.0f64;
    let mut cases = 0;
    for k in 1..=4 {
        for dim in [4, 8, 16] {
            let w = weingarten_matrix::<f64>(k, dim)?;
            let prod = w.matrix.mul(&gram_matrix::<f64>(k, dim));
            for i in 0..prod.dim() {
                for j in 0..prod.dim() {
                    let target = if i == j { 1.0 } else { 0.0 };
                    dev = dev.max((prod.get(i, j) - target).abs());
                }
            }
            cases += 1;
        }
    }
    Ok(Check { name: "weingarten_gram_inverse", deviation: dev, tolerance: 1e-10, cases })
}

/// Every check above.
pub fn oracle_checks(seed: u64) -> Result<Vec<Check>> {
    Ok(vec![
        statevector_equivalence(seed, 3)?,
        correlator_paths(seed)?,
        ti_mutual_info_paths(seed)?,
        replica_modes(seed)?,
        weingarten_inverse()?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for c in oracle_checks(17).unwrap() {
            assert!(c.pass(), "{c:?}");
            assert!(c.cases > 0);
        }
    }
}
