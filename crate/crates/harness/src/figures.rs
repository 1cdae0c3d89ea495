//! Figure bundles: CSV tables plus an optional SVG rendering each.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mps_ensembles_core::spectra::{density_difference, radial_density, RadialDensity, TransferSpectrum, DEFAULT_BINS};
use mps_ensembles_core::weingarten::{rmps_averaged_ik, slopes_in_log};

use crate::dataset::{fmt_f64, group_spectra, write_analytic, AnalyticRow, Dataset, TableWriter};
use crate::error::{HarnessError, Result};
use crate::fit::{alpha_vs_p, mean_sem};
use crate::order::{default_rho_grid, order_parameter_scan};
use crate::svg::{Line, Plot};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    /// Radial spectral densities.
    Fig2,
    /// Mutual information against gap and bond dimension.
    Fig3,
    /// Zero-modulus order parameter.
    Fig4,
    /// Analytic RMPS slopes in `log χ`.
    FigA1,
    /// Fitted exponent against measurement rate.
    FigB1,
    /// Density differences between two ensembles.
    FigC1,
}

impl Figure {
    pub const ALL: [Figure; 6] = [Figure::Fig2, Figure::Fig3, Figure::Fig4, Figure::FigA1, Figure::FigB1, Figure::FigC1];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::FigA1 => "figA1",
            Figure::FigB1 => "figB1",
            Figure::FigC1 => "figC1",
        }
    }
}

impl FromStr for Figure {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| HarnessError::Config(format!("unknown figure {s:?}")))
    }
}

#[derive(Clone, Debug)]
pub struct FigureOptions {
    pub k: usize,
    pub r: usize,
    /// Lower χ cutoffs for exponent fits; empty picks every χ leaving three points.
    pub chi_min: Vec<usize>,
    pub bins: usize,
    pub rho: Vec<f64>,
    pub analytic_chis: Vec<usize>,
    pub analytic_k: Vec<usize>,
    pub svg: bool,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            k: 2,
            r: 1,
            chi_min: vec![],
            bins: DEFAULT_BINS,
            rho: default_rho_grid(),
            analytic_chis: (1..=10).map(|e| 1usize << e).collect(),
            analytic_k: vec![2, 3, 4],
            svg: true,
        }
    }
}

struct Bundle<'a> {
    out: &'a Path,
    svg: bool,
    files: Vec<PathBuf>,
}

impl Bundle<'_> {
    fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.out.join(name);
        let mut w = TableWriter::create(&path, name.trim_end_matches(".csv"), header)?;
        for r in rows {
            w.row(r)?;
        }
        w.finish()?;
        self.files.push(path);
        Ok(())
    }

    fn plot(&mut self, name: &str, plot: &Plot) -> Result<()> {
        if self.svg {
            let path = self.out.join(name);
            std::fs::write(&path, plot.render())?;
            self.files.push(path);
        }
        Ok(())
    }
}

fn first(data: &[Dataset], figure: Figure, needed: usize) -> Result<&[Dataset]> {
    if data.len() < needed {
        return Err(HarnessError::Config(format!("{} needs {needed} dataset(s), got {}", figure.name(), data.len())));
    }
    Ok(data)
}

fn pooled_densities(ds: &Dataset, bins: usize) -> Result<BTreeMap<(u64, usize), RadialDensity>> {
    let mut out = BTreeMap::new();
    for ((p, chi), by_seed) in group_spectra(ds.require_spectra()?, true) {
        let pooled: Vec<TransferSpectrum> = by_seed.into_values().flatten().collect();
        if let Ok(d) = radial_density(&pooled, bins) {
            out.insert((p.to_bits(), chi), d);
        }
    }
    if out.is_empty() {
        return Err(HarnessError::Insufficient("no eigenvalues inside the unit disk".into()));
    }
    Ok(out)
}

fn centers(d: &RadialDensity) -> impl Iterator<Item = f64> + '_ {
    d.edges.windows(2).map(|e| 0.5 * (e[0] + e[1]))
}

fn fig2(ds: &Dataset, opts: &FigureOptions, b: &mut Bundle) -> Result<()> {
    let reference = 1.0 / (ds.local_dim() as f64).sqrt();
    let dens = pooled_densities(ds, opts.bins)?;
    let mut rows = Vec::new();
    let mut plot = Plot {
        title: "Radial spectral density".into(),
        x_label: "|λ|".into(),
        y_label: "density".into(),
        vlines: vec![(reference, "1/√d".into())],
        ..Default::default()
    };
    for (&(pbits, chi), d) in &dens {
        let p = f64::from_bits(pbits);
        for (i, rho) in d.density.iter().enumerate() {
            rows.push(vec![
                fmt_f64(p),
                chi.to_string(),
                fmt_f64(d.edges[i]),
                fmt_f64(d.edges[i + 1]),
                fmt_f64(*rho),
                fmt_f64(reference),
            ]);
        }
        plot.lines.push(Line {
            label: format!("χ={chi} p={p}"),
            points: centers(d).zip(d.density.iter().copied()).collect(),
            ..Default::default()
        });
    }
    b.table("fig2.csv", &["p", "chi", "bin_left", "bin_right", "density", "reference_radius"], &rows)?;
    b.plot("fig2.svg", &plot)
}

fn fig3(ds: &Dataset, b: &mut Bundle) -> Result<()> {
    let mut groups: BTreeMap<(u64, usize, usize, usize), Vec<f64>> = BTreeMap::new();
    for row in ds.require_minfo()? {
        groups.entry((row.p.to_bits(), row.k, row.r, row.chi)).or_default().push(row.i_k);
    }
    let mut rows = Vec::new();
    let mut by_r: BTreeMap<(u64, usize), Line> = BTreeMap::new();
    for (&(pbits, k, r, chi), v) in &groups {
        let (mean, sem) = mean_sem(v);
        let p = f64::from_bits(pbits);
        rows.push(vec![
            fmt_f64(p),
            k.to_string(),
            r.to_string(),
            chi.to_string(),
            v.len().to_string(),
            fmt_f64(mean),
            fmt_f64(sem),
            fmt_f64(mean.exp_m1()),
        ]);
        let line = by_r.entry((pbits, r)).or_insert_with(|| Line {
            label: format!("p={p} r={r}"),
            errors: Some(vec![]),
            markers: true,
            ..Default::default()
        });
        line.points.push((chi as f64, mean));
        line.errors.as_mut().expect("set above").push(sem);
    }
    b.table(
        "fig3.csv",
        &["p", "k", "r", "chi", "count", "mean_I", "sem_I", "exp_I_minus_1"],
        &rows,
    )?;
    b.plot(
        "fig3.svg",
        &Plot {
            title: "Mutual information against bond dimension".into(),
            x_label: "χ".into(),
            y_label: "mean I_k".into(),
            log_x: true,
            lines: by_r.into_values().collect(),
            ..Default::default()
        },
    )
}

fn fig4(ds: &Dataset, opts: &FigureOptions, b: &mut Bundle) -> Result<()> {
    let table = order_parameter_scan(ds.require_spectra()?, &opts.rho)?;
    let mut curves = Vec::new();
    let mut summary = Vec::new();
    let mut by_chi: BTreeMap<usize, Line> = BTreeMap::new();
    for pt in &table.points {
        for &(rho, v) in &pt.curve {
            curves.push(vec![fmt_f64(pt.p), pt.chi.to_string(), fmt_f64(rho), fmt_f64(v)]);
        }
        summary.push(vec![
            fmt_f64(pt.p),
            pt.chi.to_string(),
            fmt_f64(pt.p0),
            fmt_f64(pt.err),
            pt.count.to_string(),
            pt.realizations.to_string(),
            pt.low_confidence.to_string(),
        ]);
        let line = by_chi.entry(pt.chi).or_insert_with(|| Line {
            label: format!("χ={}", pt.chi),
            errors: Some(vec![]),
            markers: true,
            ..Default::default()
        });
        line.points.push((pt.p, pt.p0));
        line.errors.as_mut().expect("set above").push(pt.err);
    }
    let critical: Vec<Vec<String>> = table
        .critical
        .iter()
        .map(|c| {
            vec![
                c.chi.to_string(),
                fmt_f64(c.baseline_p),
                fmt_f64(c.floor),
                c.p_c.map(fmt_f64).unwrap_or_default(),
            ]
        })
        .collect();
    b.table("fig4_curves.csv", &["p", "chi", "rho", "P"], &curves)?;
    b.table(
        "fig4.csv",
        &["p", "chi", "P0", "P0_err", "count", "realizations", "low_confidence"],
        &summary,
    )?;
    b.table("fig4_critical.csv", &["chi", "baseline_p", "floor", "p_c"], &critical)?;
    b.plot(
        "fig4.svg",
        &Plot {
            title: "P(|λ| < 0⁺) against measurement rate".into(),
            x_label: "p".into(),
            y_label: "P(|λ| < 0⁺)".into(),
            lines: by_chi.into_values().collect(),
            ..Default::default()
        },
    )
}

fn fig_a1(d: usize, opts: &FigureOptions, b: &mut Bundle) -> Result<()> {
    let mut analytic = Vec::new();
    let mut rows = Vec::new();
    let mut plot = Plot {
        title: "RMPS slope of I_k in log χ".into(),
        x_label: "χ".into(),
        y_label: "∂I_k/∂log χ".into(),
        log_x: true,
        ..Default::default()
    };
    for &k in &opts.analytic_k {
        let values: Vec<f64> = opts
            .analytic_chis
            .iter()
            .map(|&chi| rmps_averaged_ik(k, d, chi, opts.r))
            .collect::<std::result::Result<_, _>>()?;
        for (&chi, &i_k) in opts.analytic_chis.iter().zip(&values) {
            analytic.push(AnalyticRow { k, d, chi, r: opts.r, i_k });
        }
        let slopes = slopes_in_log(&opts.analytic_chis, &values)?;
        for s in &slopes {
            rows.push(vec![k.to_string(), d.to_string(), s.chi.to_string(), opts.r.to_string(), fmt_f64(s.slope)]);
        }
        plot.lines.push(Line {
            label: format!("k={k}"),
            points: slopes.iter().map(|s| (s.chi as f64, s.slope)).collect(),
            markers: true,
            ..Default::default()
        });
    }
    let path = b.out.join("analytic.csv");
    write_analytic(&path, &analytic)?;
    b.files.push(path);
    b.table("figA1.csv", &["k", "d", "chi", "r", "slope"], &rows)?;
    b.plot("figA1.svg", &plot)
}

fn fig_b1(ds: &Dataset, opts: &FigureOptions, b: &mut Bundle) -> Result<()> {
    let minfo = ds.require_minfo()?;
    let chi_mins = if opts.chi_min.is_empty() {
        let mut chis: Vec<usize> = minfo.iter().map(|r| r.chi).collect();
        chis.sort_unstable();
        chis.dedup();
        chis[..chis.len().saturating_sub(2)].to_vec()
    } else {
        opts.chi_min.clone()
    };
    let table = alpha_vs_p(minfo, None, opts.k, opts.r, &chi_mins)?;
    let mut by_cut: BTreeMap<usize, Line> = BTreeMap::new();
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|row| {
            let line = by_cut.entry(row.chi_min).or_insert_with(|| Line {
                label: format!("χ_min={}", row.chi_min),
                errors: Some(vec![]),
                markers: true,
                ..Default::default()
            });
            line.points.push((row.p, row.fit.alpha));
            line.errors.as_mut().expect("set above").push(row.fit.alpha_err());
            vec![
                fmt_f64(row.p),
                row.chi_min.to_string(),
                fmt_f64(row.fit.alpha),
                fmt_f64(row.fit.alpha_err()),
                row.fit.points.to_string(),
            ]
        })
        .collect();
    b.table("figB1.csv", &["p", "chi_min", "alpha", "alpha_err", "points"], &rows)?;
    b.plot(
        "figB1.svg",
        &Plot {
            title: "Exponent α against measurement rate".into(),
            x_label: "p".into(),
            y_label: "α".into(),
            lines: by_cut.into_values().collect(),
            ..Default::default()
        },
    )
}

fn fig_c1(a: &Dataset, other: &Dataset, opts: &FigureOptions, b: &mut Bundle) -> Result<()> {
    let da = pooled_densities(a, opts.bins)?;
    let db = pooled_densities(other, opts.bins)?;
    let by_chi = |m: BTreeMap<(u64, usize), RadialDensity>| -> BTreeMap<usize, RadialDensity> {
        m.into_iter().map(|((_, chi), d)| (chi, d)).collect()
    };
    let (da, db) = (by_chi(da), by_chi(db));
    let mut rows = Vec::new();
    let mut plot = Plot {
        title: "Radial density difference".into(),
        x_label: "|λ|".into(),
        y_label: "first − second".into(),
        ..Default::default()
    };
    for (chi, x) in &da {
        let Some(y) = db.get(chi) else { continue };
        let diff = density_difference(x, y)?;
        for (i, v) in diff.iter().enumerate() {
            rows.push(vec![chi.to_string(), fmt_f64(x.edges[i]), fmt_f64(x.edges[i + 1]), fmt_f64(*v)]);
        }
        plot.lines.push(Line {
            label: format!("χ={chi}"),
            points: centers(x).zip(diff).collect(),
            ..Default::default()
        });
    }
    if rows.is_empty() {
        return Err(HarnessError::Insufficient("the two datasets share no bond dimension".into()));
    }
    b.table("figC1.csv", &["chi", "bin_left", "bin_right", "difference"], &rows)?;
    b.plot("figC1.svg", &plot)
}

/// Writes the bundle for `figure` into `out` and returns the written paths.
/// `figA1` needs no dataset; `figC1` needs two.
pub fn emit_figure_data(figure: Figure, data: &[Dataset], out: &Path, opts: &FigureOptions) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let mut b = Bundle {
        out,
        svg: opts.svg,
        files: Vec::new(),
    };
    match figure {
        Figure::Fig2 => fig2(&first(data, figure, 1)?[0], opts, &mut b)?,
        Figure::Fig3 => fig3(&first(data, figure, 1)?[0], &mut b)?,
        Figure::Fig4 => fig4(&first(data, figure, 1)?[0], opts, &mut b)?,
        Figure::FigA1 => fig_a1(data.first().map_or(2, Dataset::local_dim), opts, &mut b)?,
        Figure::FigB1 => fig_b1(&first(data, figure, 1)?[0], opts, &mut b)?,
        Figure::FigC1 => {
            let d = first(data, figure, 2)?;
            fig_c1(&d[0], &d[1], opts, &mut b)?
        }
    }
    Ok(b.files)
}
