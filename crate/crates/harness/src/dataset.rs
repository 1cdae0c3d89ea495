//! On-disk CSV schemas. Every file starts with a `#schema=…` comment line,
//! then a header row; floats are written with 17 significant digits.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mps_ensembles_core::spectra::{TransferSpectrum, UNIT_TOL};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const SPECTRA_FILE: &str = "spectra.csv";
pub const MINFO_FILE: &str = "minfo.csv";
pub const TRACES_FILE: &str = "replica_traces.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const SPECTRA_COLUMNS: [&str; 6] = ["re", "im", "chi", "p", "seed", "site"];
pub const MINFO_COLUMNS: [&str; 8] = ["family", "N", "chi", "p", "k", "r", "seed", "I_k"];
pub const TRACES_COLUMNS: [&str; 10] = ["family", "N", "chi", "p", "k", "r", "seed", "tr_ab", "tr_a", "tr_b"];
pub const DENSITY_COLUMNS: [&str; 3] = ["bin_left", "bin_right", "density"];
pub const ANALYTIC_COLUMNS: [&str; 5] = ["k", "d", "chi", "r", "I_k"];

/// Lossless float text: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub re: f64,
    pub im: f64,
    pub chi: usize,
    pub p: f64,
    pub seed: u64,
    pub site: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinfoRow {
    pub family: String,
    /// Site count, or `uniform`.
    pub n: String,
    pub chi: usize,
    pub p: f64,
    pub k: usize,
    pub r: usize,
    pub seed: u64,
    pub i_k: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub family: String,
    pub n: String,
    pub chi: usize,
    pub p: f64,
    pub k: usize,
    pub r: usize,
    pub seed: u64,
    pub tr_ab: f64,
    pub tr_a: f64,
    pub tr_b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticRow {
    pub k: usize,
    pub d: usize,
    pub chi: usize,
    pub r: usize,
    pub i_k: f64,
}

/// Writes a schema-tagged CSV with the given header and pre-formatted rows.
pub struct TableWriter {
    inner: csv::Writer<BufWriter<File>>,
}

impl TableWriter {
    pub fn create(path: &Path, schema: &str, header: &[&str]) -> Result<Self> {
        let mut file = BufWriter::new(File::create(path)?);
        writeln!(file, "#schema={schema}/v{SCHEMA_VERSION}")?;
        let mut inner = csv::Writer::from_writer(file);
        inner.write_record(header)?;
        Ok(Self { inner })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        self.inner.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

pub fn write_spectra(path: &Path, rows: &[SpectrumRow]) -> Result<()> {
    let mut w = TableWriter::create(path, "spectra", &SPECTRA_COLUMNS)?;
    for r in rows {
        w.row(&[fmt_f64(r.re), fmt_f64(r.im), r.chi.to_string(), fmt_f64(r.p), r.seed.to_string(), r.site.to_string()])?;
    }
    w.finish()
}

pub fn write_minfo(path: &Path, rows: &[MinfoRow]) -> Result<()> {
    let mut w = TableWriter::create(path, "minfo", &MINFO_COLUMNS)?;
    for r in rows {
        w.row(&[
            r.family.clone(),
            r.n.clone(),
            r.chi.to_string(),
            fmt_f64(r.p),
            r.k.to_string(),
            r.r.to_string(),
            r.seed.to_string(),
            fmt_f64(r.i_k),
        ])?;
    }
    w.finish()
}

pub fn write_traces(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = TableWriter::create(path, "replica_traces", &TRACES_COLUMNS)?;
    for r in rows {
        w.row(&[
            r.family.clone(),
            r.n.clone(),
            r.chi.to_string(),
            fmt_f64(r.p),
            r.k.to_string(),
            r.r.to_string(),
            r.seed.to_string(),
            fmt_f64(r.tr_ab),
            fmt_f64(r.tr_a),
            fmt_f64(r.tr_b),
        ])?;
    }
    w.finish()
}

pub fn write_density(path: &Path, density: &mps_ensembles_core::spectra::RadialDensity) -> Result<()> {
    let mut w = TableWriter::create(path, "density", &DENSITY_COLUMNS)?;
    for (i, rho) in density.density.iter().enumerate() {
        w.row(&[fmt_f64(density.edges[i]), fmt_f64(density.edges[i + 1]), fmt_f64(*rho)])?;
    }
    w.finish()
}

pub fn write_analytic(path: &Path, rows: &[AnalyticRow]) -> Result<()> {
    let mut w = TableWriter::create(path, "analytic", &ANALYTIC_COLUMNS)?;
    for r in rows {
        w.row(&[r.k.to_string(), r.d.to_string(), r.chi.to_string(), r.r.to_string(), fmt_f64(r.i_k)])?;
    }
    w.finish()
}

/// Spectra of one `(p, chi)` grid point, keyed by realization seed.
pub type SeedSpectra = BTreeMap<u64, Vec<TransferSpectrum>>;

/// Rebuilds per-`(seed, site)` spectra from rows, grouped by `(p, chi)` in
/// ascending order. `remove_unit` drops `|λ| > 1 − UNIT_TOL`.
pub fn group_spectra(rows: &[SpectrumRow], remove_unit: bool) -> Vec<((f64, usize), SeedSpectra)> {
    let mut groups: BTreeMap<(usize, u64), BTreeMap<u64, BTreeMap<usize, Vec<num_complex::Complex<f64>>>>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.chi, r.p.to_bits()))
            .or_default()
            .entry(r.seed)
            .or_default()
            .entry(r.site)
            .or_default()
            .push(num_complex::Complex::new(r.re, r.im));
    }
    let mut out: Vec<((f64, usize), SeedSpectra)> = groups
        .into_iter()
        .map(|((chi, pbits), by_seed)| {
            let spectra = by_seed
                .into_iter()
                .map(|(seed, sites)| {
                    let list = sites
                        .into_iter()
                        .map(|(site, eigs)| {
                            let unit_count = eigs.iter().filter(|z| z.norm() > 1.0 - UNIT_TOL).count();
                            let eigenvalues = if remove_unit {
                                eigs.into_iter().filter(|z| z.norm() <= 1.0 - UNIT_TOL).collect()
                            } else {
                                eigs
                            };
                            TransferSpectrum {
                                eigenvalues,
                                chi,
                                site: Some(site),
                                spec: None,
                                unit_eigenvalues_removed: remove_unit,
                                unit_count,
                            }
                        })
                        .collect();
                    (seed, list)
                })
                .collect();
            ((f64::from_bits(pbits), chi), spectra)
        })
        .collect();
    out.sort_by(|a, b| a.0 .1.cmp(&b.0 .1).then(a.0 .0.total_cmp(&b.0 .0)));
    out
}

/// A parsed CSV table with named columns.
pub struct Table {
    pub header: Vec<String>,
    pub records: Vec<csv::StringRecord>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
        let header = rdr.headers()?.iter().map(str::to_owned).collect();
        let records = rdr.records().collect::<std::result::Result<_, _>>()?;
        Ok(Self { header, records })
    }

    fn index(&self, name: &str) -> usize {
        self.header.iter().position(|h| h == name).expect("checked column")
    }

    fn missing(&self, file: &str, columns: &[&str]) -> Vec<String> {
        columns
            .iter()
            .filter(|c| !self.header.iter().any(|h| h == *c))
            .map(|c| format!("{file}: {c}"))
            .collect()
    }
}

fn parse<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, what: &str) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| HarnessError::Insufficient(format!("unparsable {what} field")))
}

/// Everything a sweep wrote to one directory.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub dir: PathBuf,
    pub spectra: Vec<SpectrumRow>,
    pub minfo: Vec<MinfoRow>,
    pub traces: Vec<TraceRow>,
    pub manifest: Option<serde_json::Value>,
    missing: Vec<String>,
}

impl Dataset {
    pub fn load(dir: &Path) -> Result<Self> {
        let mut ds = Dataset {
            dir: dir.to_path_buf(),
            ..Default::default()
        };
        let table = |name: &str, columns: &[&str], missing: &mut Vec<String>| -> Result<Option<Table>> {
            let path = dir.join(name);
            if !path.exists() {
                missing.extend(columns.iter().map(|c| format!("{name}: {c}")));
                return Ok(None);
            }
            let t = Table::read(&path)?;
            let miss = t.missing(name, columns);
            if miss.is_empty() {
                Ok(Some(t))
            } else {
                missing.extend(miss);
                Ok(None)
            }
        };
        if let Some(t) = table(SPECTRA_FILE, &SPECTRA_COLUMNS, &mut ds.missing)? {
            let ix: Vec<usize> = SPECTRA_COLUMNS.iter().map(|c| t.index(c)).collect();
            for rec in &t.records {
                ds.spectra.push(SpectrumRow {
                    re: parse(rec, ix[0], "re")?,
                    im: parse(rec, ix[1], "im")?,
                    chi: parse(rec, ix[2], "chi")?,
                    p: parse(rec, ix[3], "p")?,
                    seed: parse(rec, ix[4], "seed")?,
                    site: parse(rec, ix[5], "site")?,
                });
            }
        }
        if let Some(t) = table(MINFO_FILE, &MINFO_COLUMNS, &mut ds.missing)? {
            let ix: Vec<usize> = MINFO_COLUMNS.iter().map(|c| t.index(c)).collect();
            for rec in &t.records {
                ds.minfo.push(MinfoRow {
                    family: parse(rec, ix[0], "family")?,
                    n: parse(rec, ix[1], "N")?,
                    chi: parse(rec, ix[2], "chi")?,
                    p: parse(rec, ix[3], "p")?,
                    k: parse(rec, ix[4], "k")?,
                    r: parse(rec, ix[5], "r")?,
                    seed: parse(rec, ix[6], "seed")?,
                    i_k: parse(rec, ix[7], "I_k")?,
                });
            }
        }
        if let Some(t) = table(TRACES_FILE, &TRACES_COLUMNS, &mut ds.missing)? {
            let ix: Vec<usize> = TRACES_COLUMNS.iter().map(|c| t.index(c)).collect();
            for rec in &t.records {
                ds.traces.push(TraceRow {
                    family: parse(rec, ix[0], "family")?,
                    n: parse(rec, ix[1], "N")?,
                    chi: parse(rec, ix[2], "chi")?,
                    p: parse(rec, ix[3], "p")?,
                    k: parse(rec, ix[4], "k")?,
                    r: parse(rec, ix[5], "r")?,
                    seed: parse(rec, ix[6], "seed")?,
                    tr_ab: parse(rec, ix[7], "tr_ab")?,
                    tr_a: parse(rec, ix[8], "tr_a")?,
                    tr_b: parse(rec, ix[9], "tr_b")?,
                });
            }
        }
        let manifest = dir.join(MANIFEST_FILE);
        if manifest.exists() {
            ds.manifest = Some(serde_json::from_reader(File::open(manifest)?)?);
        }
        Ok(ds)
    }

    /// Errors unless the spectra table is present and nonempty.
    pub fn require_spectra(&self) -> Result<&[SpectrumRow]> {
        self.require(SPECTRA_FILE, self.spectra.is_empty())?;
        Ok(&self.spectra)
    }

    pub fn require_minfo(&self) -> Result<&[MinfoRow]> {
        self.require(MINFO_FILE, self.minfo.is_empty())?;
        Ok(&self.minfo)
    }

    fn require(&self, file: &str, empty: bool) -> Result<()> {
        let miss: Vec<String> = self.missing.iter().filter(|m| m.starts_with(file)).cloned().collect();
        if !miss.is_empty() {
            return Err(HarnessError::MissingColumns(miss));
        }
        if empty {
            return Err(HarnessError::Insufficient(format!("{file} has no rows")));
        }
        Ok(())
    }

    /// Physical dimension recorded in the manifest (2 when absent).
    pub fn local_dim(&self) -> usize {
        self.manifest
            .as_ref()
            .and_then(|m| m.pointer("/config/d"))
            .and_then(|v| v.as_u64())
            .map_or(2, |d| d as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits_roundtrip() {
        for x in [0.1, 1.0 / 3.0, std::f64::consts::PI * 1e-300, -2.5e17, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
            let digits = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count();
            assert_eq!(digits, 17);
        }
    }

    #[test]
    fn tables_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let spectra = vec![SpectrumRow { re: 0.25, im: -1.0 / 7.0, chi: 4, p: 0.3, seed: 99, site: 2 }];
        let minfo = vec![MinfoRow {
            family: "monitored".into(),
            n: "24".into(),
            chi: 8,
            p: 0.1,
            k: 2,
            r: 3,
            seed: u64::MAX,
            i_k: 0.123456789,
        }];
        write_spectra(&dir.path().join(SPECTRA_FILE), &spectra).unwrap();
        write_minfo(&dir.path().join(MINFO_FILE), &minfo).unwrap();
        let ds = Dataset::load(dir.path()).unwrap();
        assert_eq!(ds.require_spectra().unwrap(), &spectra[..]);
        assert_eq!(ds.require_minfo().unwrap(), &minfo[..]);
        let text = std::fs::read_to_string(dir.path().join(SPECTRA_FILE)).unwrap();
        assert!(text.starts_with("#schema=spectra/v1\nre,im,chi,p,seed,site\n"));
    }

    #[test]
    fn empty_directory_lists_missing_columns() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset::load(dir.path()).unwrap();
        match ds.require_spectra() {
            Err(HarnessError::MissingColumns(cols)) => {
                assert_eq!(cols.len(), 6);
                assert!(cols.iter().any(|c| c == "spectra.csv: re"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
