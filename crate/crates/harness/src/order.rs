//! The zero-modulus weight `P(|λ| < 0⁺)` of pooled transfer spectra,
//! extrapolated linearly from a grid of small radii.

use serde::{Deserialize, Serialize};

use mps_ensembles_core::spectra::{small_eig_counts, small_eig_fraction, TransferSpectrum};

use crate::dataset::{group_spectra, SpectrumRow};
use crate::error::{HarnessError, Result};
use crate::fit::{linear_fit, mean_sem};

/// Pooled eigenvalue counts below which a point is flagged.
pub const MIN_CONFIDENT_COUNT: usize = 10_000;

/// `0.01, 0.02, …, 0.10`.
pub fn default_rho_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 100.0).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderPoint {
    pub p: f64,
    pub chi: usize,
    /// Pooled `P(|λ| < ρ)` on the radius grid.
    pub curve: Vec<(f64, f64)>,
    /// Extrapolated `P(|λ| < 0⁺)`.
    pub p0: f64,
    pub err: f64,
    pub count: usize,
    pub realizations: usize,
    pub low_confidence: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalEstimate {
    pub chi: usize,
    pub baseline_p: f64,
    /// Three times `|P0| + err` of the baseline point.
    pub floor: f64,
    /// Smallest `p` above the baseline whose `P0` exceeds the floor.
    pub p_c: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderTable {
    pub rho: Vec<f64>,
    pub points: Vec<OrderPoint>,
    pub critical: Vec<CriticalEstimate>,
}

impl OrderTable {
    pub fn point(&self, p: f64, chi: usize) -> Option<&OrderPoint> {
        self.points.iter().find(|x| x.p == p && x.chi == chi)
    }
}

fn cumulative(spectra: &[TransferSpectrum], rho: &[f64]) -> Result<Vec<f64>> {
    Ok(rho.iter().map(|&r| small_eig_fraction(spectra, r)).collect::<std::result::Result<_, _>>()?)
}

fn intercept(rho: &[f64], values: &[f64]) -> Result<(f64, f64)> {
    let (_, b, cov, _) = linear_fit(rho, values, None)?;
    Ok((b, cov[1][1].max(0.0).sqrt()))
}

pub fn order_parameter_scan(rows: &[SpectrumRow], rho: &[f64]) -> Result<OrderTable> {
    if rows.is_empty() {
        return Err(HarnessError::Insufficient("no spectra".into()));
    }
    if rho.len() < 3 || rho.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
        return Err(HarnessError::Config("rho grid needs at least 3 radii in (0, 1]".into()));
    }
    let mut points = Vec::new();
    for ((p, chi), by_seed) in group_spectra(rows, false) {
        let pooled: Vec<TransferSpectrum> = by_seed.values().flatten().cloned().collect();
        let (_, count) = small_eig_counts(&pooled, 1.0)?;
        if count == 0 {
            continue;
        }
        let curve_vals = cumulative(&pooled, rho)?;
        let (p0, fit_err) = intercept(rho, &curve_vals)?;
        let per_seed = by_seed
            .values()
            .map(|s| intercept(rho, &cumulative(s, rho)?).map(|x| x.0))
            .collect::<Result<Vec<f64>>>()?;
        let err = if per_seed.len() > 1 { mean_sem(&per_seed).1 } else { fit_err };
        points.push(OrderPoint {
            p,
            chi,
            curve: rho.iter().copied().zip(curve_vals).collect(),
            p0,
            err,
            count,
            realizations: by_seed.len(),
            low_confidence: count < MIN_CONFIDENT_COUNT,
        });
    }
    let mut critical = Vec::new();
    if points.is_empty() {
        return Err(HarnessError::Insufficient("no eigenvalues inside the unit disk".into()));
    }
    let mut chis: Vec<usize> = points.iter().map(|x| x.chi).collect();
    chis.dedup();
    for chi in chis {
        let series: Vec<&OrderPoint> = points.iter().filter(|x| x.chi == chi).collect();
        let base = series[0];
        let floor = 3.0 * (base.p0.abs() + base.err);
        let p_c = series[1..].iter().find(|x| x.p0 > floor).map(|x| x.p);
        critical.push(CriticalEstimate {
            chi,
            baseline_p: base.p,
            floor,
            p_c,
        });
    }
    Ok(OrderTable {
        rho: rho.to_vec(),
        points,
        critical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(m: f64, phase: f64, p: f64, chi: usize, seed: u64) -> SpectrumRow {
        SpectrumRow {
            re: m * phase.cos(),
            im: m * phase.sin(),
            chi,
            p,
            seed,
            site: 0,
        }
    }

    #[test]
    fn exact_zero_atom_is_recovered() {
        let mut rows = Vec::new();
        for seed in 0..20u64 {
            for j in 0..100 {
                let m = if j < 10 { 0.0 } else { 0.2 + 0.7 * (j as f64 / 100.0) };
                rows.push(row(m, j as f64, 0.3, 4, seed));
            }
        }
        let t = order_parameter_scan(&rows, &default_rho_grid()).unwrap();
        let pt = t.point(0.3, 4).unwrap();
        assert!((pt.p0 - 0.10).abs() < 1e-12, "{}", pt.p0);
        assert!(pt.err < 1e-12);
        assert_eq!(pt.realizations, 20);
        assert!(pt.low_confidence);
    }

    #[test]
    fn unit_eigenvalues_are_ignored() {
        let rows = vec![row(1.0, 0.0, 0.0, 2, 0), row(0.5, 0.0, 0.0, 2, 0), row(0.0, 0.0, 0.0, 2, 0)];
        let t = order_parameter_scan(&rows, &default_rho_grid()).unwrap();
        assert_eq!(t.points[0].count, 2);
        assert!((t.points[0].p0 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn critical_point_uses_baseline_floor() {
        let mut rows = Vec::new();
        for (p, zeros) in [(0.0, 0), (0.1, 0), (0.2, 5), (0.3, 20)] {
            for seed in 0..4u64 {
                for j in 0..100 {
                    let m = if j < zeros { 0.0 } else { 0.5 };
                    rows.push(row(m, 0.0, p, 8, seed));
                }
            }
        }
        let t = order_parameter_scan(&rows, &default_rho_grid()).unwrap();
        assert_eq!(t.critical[0].floor, 0.0);
        assert_eq!(t.critical[0].p_c, Some(0.2));
    }

    #[test]
    fn cumulative_is_monotone_in_rho() {
        let rows: Vec<SpectrumRow> = (0..500).map(|j| row((j as f64 * 0.618).fract() * 0.9, j as f64, 0.1, 3, j % 7)).collect();
        let t = order_parameter_scan(&rows, &default_rho_grid()).unwrap();
        let c = &t.points[0].curve;
        assert!(c.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn bad_grid_and_empty_input() {
        assert!(matches!(order_parameter_scan(&[], &default_rho_grid()), Err(HarnessError::Insufficient(_))));
        let rows = vec![row(0.5, 0.0, 0.0, 2, 0)];
        assert!(matches!(order_parameter_scan(&rows, &[0.0, 0.1, 0.2]), Err(HarnessError::Config(_))));
    }
}
