//! Exponent fits of mutual information against `log χ`.
//!
//! The primary estimator regresses `log(e^I − 1)` on `log χ`, so that
//! `I = log(1 + c χ^α)` gives slope `α`; the secondary one regresses `I`
//! itself on `log χ`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{MinfoRow, TraceRow};
use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Slope of `log(e^I − 1)` against `log χ`.
    ExpScaled,
    /// Slope of `I` against `log χ`.
    Direct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub estimator: Estimator,
    pub alpha: f64,
    pub intercept: f64,
    /// Covariance of `(alpha, intercept)`.
    pub covariance: [[f64; 2]; 2],
    pub chi_min: usize,
    pub residual_norm: f64,
    pub points: usize,
}

impl FitResult {
    pub fn alpha_err(&self) -> f64 {
        self.covariance[0][0].max(0.0).sqrt()
    }
}

/// Mean and standard error of `I_k` at one bond dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiPoint {
    pub chi: usize,
    pub mean: f64,
    pub sem: f64,
    pub count: usize,
}

pub fn mean_sem(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Selects one `(family, p, k, r)` series from mutual-information rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub family: Option<String>,
    pub p: f64,
    pub k: usize,
    pub r: usize,
}

impl Series {
    fn matches(&self, row: &MinfoRow) -> bool {
        self.family.as_ref().is_none_or(|f| *f == row.family) && row.p == self.p && row.k == self.k && row.r == self.r
    }
}

/// Per-χ statistics of one series, ascending in χ.
pub fn chi_points(rows: &[MinfoRow], series: &Series) -> Vec<ChiPoint> {
    let mut by_chi: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for row in rows.iter().filter(|r| series.matches(r)) {
        by_chi.entry(row.chi).or_default().push(row.i_k);
    }
    by_chi
        .into_iter()
        .map(|(chi, v)| {
            let (mean, sem) = mean_sem(&v);
            ChiPoint { chi, mean, sem, count: v.len() }
        })
        .collect()
}

/// Per-χ `I_k` computed from ensemble-averaged traces,
/// `1/(k−1) log(E Tr ρ_AB^k / (E Tr ρ_A^k · E Tr ρ_B^k))`.
pub fn annealed_points(rows: &[TraceRow], family: Option<&str>, p: f64, k: usize, r: usize) -> Vec<(usize, f64)> {
    let mut by_chi: BTreeMap<usize, [f64; 4]> = BTreeMap::new();
    for t in rows
        .iter()
        .filter(|t| family.is_none_or(|f| f == t.family) && t.p == p && t.k == k && t.r == r)
    {
        let e = by_chi.entry(t.chi).or_default();
        e[0] += t.tr_ab;
        e[1] += t.tr_a;
        e[2] += t.tr_b;
        e[3] += 1.0;
    }
    by_chi
        .into_iter()
        .map(|(chi, [ab, a, b, n])| (chi, ((ab / n) / ((a / n) * (b / n))).ln() / (k as f64 - 1.0)))
        .collect()
}

/// Weighted straight-line fit `y = alpha x + intercept`. Uses inverse
/// variance weights when every `sigma` is positive, ordinary least squares
/// otherwise. `y` is centered on its first entry so exactly constant data
/// gives an exactly zero slope.
pub fn linear_fit(x: &[f64], y: &[f64], sigma: Option<&[f64]>) -> Result<(f64, f64, [[f64; 2]; 2], f64)> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return Err(HarnessError::Insufficient(format!("{n} points; a fit needs at least 3")));
    }
    let weighted = sigma.is_some_and(|s| s.iter().all(|&v| v > 0.0 && v.is_finite()));
    let w: Vec<f64> = match sigma {
        Some(s) if weighted => s.iter().map(|v| 1.0 / (v * v)).collect(),
        _ => vec![1.0; n],
    };
    let y0 = y[0];
    let yc: Vec<f64> = y.iter().map(|v| v - y0).collect();
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = yc.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(&w).map(|(a, b)| b * (a - xm).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(HarnessError::Insufficient("all abscissae coincide".into()));
    }
    let sxy: f64 = (0..n).map(|i| w[i] * (x[i] - xm) * (yc[i] - ym)).sum();
    let alpha = sxy / sxx;
    let intercept_c = ym - alpha * xm;
    let resid: Vec<f64> = (0..n).map(|i| yc[i] - intercept_c - alpha * x[i]).collect();
    let chi2: f64 = (0..n).map(|i| w[i] * resid[i] * resid[i]).sum();
    let dof = (n - 2) as f64;
    let scale = if weighted { (chi2 / dof).max(1.0) } else { chi2 / dof };
    let var_a = scale / sxx;
    let var_b = scale * (1.0 / sw + xm * xm / sxx);
    let cov_ab = -scale * xm / sxx;
    let residual_norm = resid.iter().map(|r| r * r).sum::<f64>().sqrt();
    Ok((alpha, intercept_c + y0, [[var_a, cov_ab], [cov_ab, var_b]], residual_norm))
}

/// Fits `points` with `chi ≥ chi_min`.
pub fn fit_points(points: &[ChiPoint], chi_min: usize, estimator: Estimator) -> Result<FitResult> {
    let used: Vec<&ChiPoint> = points
        .iter()
        .filter(|p| p.chi >= chi_min && p.chi > 0)
        .filter(|p| estimator == Estimator::Direct || p.mean > 0.0)
        .collect();
    let x: Vec<f64> = used.iter().map(|p| (p.chi as f64).ln()).collect();
    let (y, s): (Vec<f64>, Vec<f64>) = used
        .iter()
        .map(|p| match estimator {
            Estimator::Direct => (p.mean, p.sem),
            Estimator::ExpScaled => {
                let e = p.mean.exp_m1();
                (e.ln(), p.sem * (1.0 + 1.0 / e))
            }
        })
        .unzip();
    let (alpha, intercept, covariance, residual_norm) = linear_fit(&x, &y, Some(&s))?;
    Ok(FitResult {
        estimator,
        alpha,
        intercept,
        covariance,
        chi_min,
        residual_norm,
        points: used.len(),
    })
}

/// Both estimators for one series.
pub fn fit_alpha(rows: &[MinfoRow], series: &Series, chi_min: usize) -> Result<[FitResult; 2]> {
    let pts = chi_points(rows, series);
    Ok([
        fit_points(&pts, chi_min, Estimator::ExpScaled)?,
        fit_points(&pts, chi_min, Estimator::Direct)?,
    ])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaRow {
    pub p: f64,
    pub chi_min: usize,
    pub fit: FitResult,
}

/// Primary-estimator `α(p)` for each `chi_min`; combinations with fewer
/// than three usable χ values are skipped.
pub fn alpha_vs_p(rows: &[MinfoRow], family: Option<&str>, k: usize, r: usize, chi_mins: &[usize]) -> Result<Vec<AlphaRow>> {
    let mut ps: Vec<f64> = rows.iter().filter(|x| x.k == k && x.r == r).map(|x| x.p).collect();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    let mut out = Vec::new();
    for p in ps {
        let series = Series {
            family: family.map(str::to_owned),
            p,
            k,
            r,
        };
        let pts = chi_points(rows, &series);
        for &chi_min in chi_mins {
            if let Ok(fit) = fit_points(&pts, chi_min, Estimator::ExpScaled) {
                out.push(AlphaRow { p, chi_min, fit });
            }
        }
    }
    if out.is_empty() {
        return Err(HarnessError::Insufficient(format!("no (p, chi_min) with 3 usable chi values at k={k}, r={r}")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rows_from(f: impl Fn(usize) -> f64, chis: &[usize]) -> Vec<MinfoRow> {
        chis.iter()
            .map(|&chi| MinfoRow {
                family: "rmps".into(),
                n: "uniform".into(),
                chi,
                p: 0.0,
                k: 2,
                r: 1,
                seed: 0,
                i_k: f(chi),
            })
            .collect()
    }

    fn series() -> Series {
        Series { family: None, p: 0.0, k: 2, r: 1 }
    }

    #[test]
    fn exact_line_is_recovered() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 1.5 * v - 0.25).collect();
        let (a, b, cov, res) = linear_fit(&x, &y, None).unwrap();
        assert!((a - 1.5).abs() < 1e-14 && (b + 0.25).abs() < 1e-14);
        assert!(res < 1e-14 && cov[0][0].abs() < 1e-26);
    }

    #[test]
    fn log_one_plus_power_law() {
        let chis: Vec<usize> = (0..=7).map(|i| 4usize << i).collect();
        for a in [1.0f64, 2.0] {
            let rows = rows_from(|c| (0.3 * (c as f64).powf(a)).ln_1p(), &chis);
            let [primary, _] = fit_alpha(&rows, &series(), 4).unwrap();
            assert!((primary.alpha - a).abs() < 0.01 * a, "{a}: {}", primary.alpha);
        }
    }

    #[test]
    fn constant_data_has_zero_slope() {
        let chis = [2, 4, 8, 16, 32];
        let rows = rows_from(|_| 0.731, &chis);
        let [primary, direct] = fit_alpha(&rows, &series(), 2).unwrap();
        assert_eq!(primary.alpha, 0.0);
        assert_eq!(direct.alpha, 0.0);
    }

    #[test]
    fn too_few_points() {
        let rows = rows_from(|c| c as f64, &[2, 4, 8]);
        assert!(matches!(fit_alpha(&rows, &series(), 4), Err(HarnessError::Insufficient(_))));
    }

    #[test]
    fn weighted_covariance_scales_with_noise() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [0.1, 0.9, 2.2, 2.8, 4.1];
        let (_, _, tight, _) = linear_fit(&x, &y, Some(&[0.01; 5])).unwrap();
        let (_, _, loose, _) = linear_fit(&x, &y, Some(&[1.0; 5])).unwrap();
        assert!(tight[0][0] > 0.0 && loose[0][0] >= tight[0][0]);
    }

    #[test]
    fn annealed_estimator_matches_single_realization() {
        let t = TraceRow {
            family: "rmps".into(),
            n: "12".into(),
            chi: 4,
            p: 0.0,
            k: 2,
            r: 1,
            seed: 0,
            tr_ab: 0.2,
            tr_a: 0.3,
            tr_b: 0.4,
        };
        let pts = annealed_points(&[t], None, 0.0, 2, 1);
        assert!((pts[0].1 - (0.2f64 / 0.12).ln()).abs() < 1e-15);
    }

    #[test]
    fn alpha_vs_p_orders_rows() {
        let chis = [2, 4, 8, 16];
        let mut rows = rows_from(|c| (c as f64).powi(2).ln_1p(), &chis);
        rows.extend(rows_from(|_| 0.2, &chis).into_iter().map(|mut r| {
            r.p = 0.3;
            r
        }));
        let table = alpha_vs_p(&rows, None, 2, 1, &[2, 4]).unwrap();
        assert_eq!(table.len(), 4);
        assert_eq!((table[0].p, table[0].chi_min), (0.0, 2));
        assert!(table[2..].iter().all(|row| row.p == 0.3 && row.fit.alpha == 0.0));
    }

    proptest! {
        #[test]
        fn slope_is_shift_invariant(a in -3.0f64..3.0, b in -5.0f64..5.0, shift in -10.0f64..10.0) {
            let x = [0.5, 1.0, 2.0, 2.5, 4.0];
            let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| a * v + b + 0.01 * (i as f64).sin()).collect();
            let ys: Vec<f64> = y.iter().map(|v| v + shift).collect();
            let (a1, b1, ..) = linear_fit(&x, &y, None).unwrap();
            let (a2, b2, ..) = linear_fit(&x, &ys, None).unwrap();
            prop_assert!((a1 - a2).abs() < 1e-10);
            prop_assert!((b2 - b1 - shift).abs() < 1e-9);
        }
    }
}
