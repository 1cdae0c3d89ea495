//! Parallel ensemble sweeps over `(chi, p, realization)`.
//!
//! Every task derives its own seed from the master seed, so the rows do not
//! depend on scheduling; results are collected in task order and written by
//! a single writer.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use mps_ensembles_core::circuits::{generate_finite, run_uniform_ti, CircuitSpec, Sites};
use mps_ensembles_core::mps::uniform::UniformCanonical;
use mps_ensembles_core::mps::{MpsState, DEFAULT_NULL_TOL};
use mps_ensembles_core::replica::{renyi_mutual_info_ti, replica_traces_finite, BlockLayout, ReplicaOptions};
use mps_ensembles_core::rng::mix_seed;
use mps_ensembles_core::spectra::{site_spectrum, spectrum, TransferSpectrum};
use mps_ensembles_core::Error as CoreError;

use crate::cache::StateCache;
use crate::config::{SpectrumSites, SweepConfig};
use crate::dataset::{
    write_minfo, write_spectra, write_traces, MinfoRow, SpectrumRow, TraceRow, MANIFEST_FILE, MINFO_FILE, SPECTRA_FILE,
    TRACES_FILE,
};
use crate::error::{core_exit_code, HarnessError, Result};

pub const SCHEMA: &str = "mps-ensembles/1";

/// Seed of one realization. Independent of the family and of `p`, so
/// monitored runs at different rates share their gate streams.
pub fn realization_seed(cfg: &SweepConfig, chi: usize, realization: usize) -> u64 {
    let n = match cfg.n {
        Sites::Finite(n) => n as u64,
        Sites::Uniform(_) => u64::MAX,
    };
    mix_seed(&[cfg.seed, n, chi as u64, cfg.depth_for(chi) as u64, realization as u64])
}

#[derive(Clone, Debug)]
pub struct Task {
    pub chi: usize,
    pub p: f64,
    pub realization: usize,
    pub spec: CircuitSpec,
}

pub fn tasks(cfg: &SweepConfig) -> Vec<Task> {
    let mut out = Vec::new();
    for &chi in &cfg.chi {
        for &p in &cfg.p {
            for realization in 0..cfg.realizations {
                let spec = CircuitSpec {
                    family: cfg.family,
                    n: cfg.n,
                    d: cfg.d,
                    chi,
                    p,
                    depth: cfg.depth_for(chi),
                    seed: realization_seed(cfg, chi, realization),
                    realization: 0,
                    truncation_mode: cfg.truncation_mode,
                    ti_protocol: cfg.ti_protocol,
                };
                out.push(Task { chi, p, realization, spec });
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    BudgetExceeded,
    NumericalFailure,
    Failed,
}

impl PointStatus {
    fn of(e: &CoreError) -> Self {
        match core_exit_code(e) {
            3 => PointStatus::BudgetExceeded,
            4 => PointStatus::NumericalFailure,
            _ => PointStatus::Failed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub chi: usize,
    pub p: f64,
    pub realization: usize,
    pub seed: u64,
    pub status: PointStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Default)]
struct TaskOutput {
    spectra: Vec<SpectrumRow>,
    minfo: Vec<MinfoRow>,
    traces: Vec<TraceRow>,
    error: Option<CoreError>,
}

impl TaskOutput {
    fn fail(&mut self, e: CoreError) {
        if self.error.is_none() {
            self.error = Some(e);
        }
    }
}

/// Summary of a finished sweep; the files are already on disk.
#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub dir: PathBuf,
    pub points: Vec<PointRecord>,
    pub spectra_rows: usize,
    pub minfo_rows: usize,
}

impl SweepOutcome {
    /// 0 if every point succeeded, else 3 for budget or 4 for numerical
    /// failures (budget wins).
    pub fn exit_code(&self) -> i32 {
        let has = |s| self.points.iter().any(|p| p.status == s);
        if has(PointStatus::BudgetExceeded) {
            3
        } else if has(PointStatus::NumericalFailure) {
            4
        } else if has(PointStatus::Failed) {
            2
        } else {
            0
        }
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.status != PointStatus::Ok).count()
    }
}

fn n_label(n: Sites) -> String {
    match n {
        Sites::Finite(n) => n.to_string(),
        Sites::Uniform(_) => "uniform".into(),
    }
}

fn push_spectrum(out: &mut TaskOutput, task: &Task, s: &TransferSpectrum, site: usize) {
    out.spectra.extend(s.eigenvalues.iter().map(|z| SpectrumRow {
        re: z.re,
        im: z.im,
        chi: task.chi,
        p: task.p,
        seed: task.spec.seed,
        site,
    }));
}

fn minfo_row(cfg: &SweepConfig, task: &Task, r: usize, i_k: f64) -> MinfoRow {
    MinfoRow {
        family: cfg.family.name().into(),
        n: n_label(cfg.n),
        chi: task.chi,
        p: task.p,
        k: cfg.k,
        r,
        seed: task.spec.seed,
        i_k,
    }
}

fn finite_state(task: &Task, cache: Option<&StateCache>) -> std::result::Result<MpsState<f64>, CoreError> {
    if let Some(s) = cache.and_then(|c| c.finite(&task.spec)) {
        return Ok(s);
    }
    let (state, _) = generate_finite::<f64>(&task.spec)?;
    if let Some(c) = cache {
        c.store_finite(&task.spec, &state);
    }
    Ok(state)
}

fn uniform_cell(task: &Task, cache: Option<&StateCache>) -> std::result::Result<UniformCanonical<f64>, CoreError> {
    if let Some(c) = cache.and_then(|c| c.uniform(&task.spec)) {
        return Ok(c);
    }
    let cell = run_uniform_ti::<f64>(&task.spec, &mut task.spec.rng())?;
    if let Some(c) = cache {
        c.store_uniform(&task.spec, &cell);
    }
    Ok(cell)
}

fn run_finite(cfg: &SweepConfig, task: &Task, n: usize, cache: Option<&StateCache>, out: &mut TaskOutput) {
    let state = match finite_state(task, cache) {
        Ok(s) => s,
        Err(e) => return out.fail(e),
    };
    for site in cfg.spectrum_site_list(n) {
        match site_spectrum(&state, site, DEFAULT_NULL_TOL, cfg.remove_unit) {
            Ok(s) => push_spectrum(out, task, &s, site),
            Err(e) => out.fail(e),
        }
    }
    if !cfg.mutual_info {
        return;
    }
    let opts = ReplicaOptions { budget: cfg.budget };
    for &r in &cfg.r {
        let traces = BlockLayout::centered(n, r).and_then(|l| replica_traces_finite(&state, &l, cfg.k, &opts));
        match traces {
            Ok(t) => {
                out.minfo.push(minfo_row(cfg, task, r, t.mutual_info()));
                out.traces.push(TraceRow {
                    family: cfg.family.name().into(),
                    n: n.to_string(),
                    chi: task.chi,
                    p: task.p,
                    k: cfg.k,
                    r,
                    seed: task.spec.seed,
                    tr_ab: t.ab,
                    tr_a: t.a,
                    tr_b: t.b,
                });
            }
            Err(e) => out.fail(e),
        }
    }
}

fn run_uniform(cfg: &SweepConfig, task: &Task, cache: Option<&StateCache>, out: &mut TaskOutput) {
    let cell = match uniform_cell(task, cache) {
        Ok(c) => c,
        Err(e) => return out.fail(e),
    };
    let sites: Vec<usize> = match cfg.spectrum_sites {
        SpectrumSites::None => vec![],
        SpectrumSites::Center => vec![0],
        SpectrumSites::Window(w) => (0..w.min(cell.state.len())).collect(),
    };
    for site in sites {
        match spectrum(cell.state.tensor(site), cfg.remove_unit) {
            Ok(s) => push_spectrum(out, task, &s, site),
            Err(e) => out.fail(e),
        }
    }
    if !cfg.mutual_info {
        return;
    }
    for &r in &cfg.r {
        match renyi_mutual_info_ti(&cell, cfg.k, r) {
            Ok(i) => out.minfo.push(minfo_row(cfg, task, r, i)),
            Err(e) => out.fail(e),
        }
    }
}

fn run_task(cfg: &SweepConfig, task: &Task, cache: Option<&StateCache>) -> TaskOutput {
    let mut out = TaskOutput::default();
    if let Err(e) = task.spec.validate() {
        out.fail(e);
        return out;
    }
    match cfg.n {
        Sites::Finite(n) => run_finite(cfg, task, n, cache, &mut out),
        Sites::Uniform(_) => run_uniform(cfg, task, cache, &mut out),
    }
    out
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema: &'static str,
    code_version: &'static str,
    config_hash: String,
    config: SweepConfig,
    files: Vec<&'static str>,
    points: &'a [PointRecord],
}

/// Runs the sweep with the cache taken from the environment.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    run_sweep_with_cache(cfg, StateCache::from_env().as_ref())
}

pub fn run_sweep_with_cache(cfg: &SweepConfig, cache: Option<&StateCache>) -> Result<SweepOutcome> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.worker_count())
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
    let all = tasks(cfg);
    let outputs: Vec<TaskOutput> = pool.install(|| all.par_iter().map(|t| run_task(cfg, t, cache)).collect());

    let dir = cfg.out.clone();
    std::fs::create_dir_all(&dir)?;
    let mut spectra = Vec::new();
    let mut minfo = Vec::new();
    let mut traces = Vec::new();
    let mut points = Vec::with_capacity(all.len());
    for (task, out) in all.iter().zip(outputs) {
        spectra.extend(out.spectra);
        minfo.extend(out.minfo);
        traces.extend(out.traces);
        points.push(PointRecord {
            chi: task.chi,
            p: task.p,
            realization: task.realization,
            seed: task.spec.seed,
            status: out.error.as_ref().map_or(PointStatus::Ok, PointStatus::of),
            message: out.error.map(|e| e.to_string()),
        });
    }
    let mut files = Vec::new();
    if cfg.spectrum_sites != SpectrumSites::None {
        write_spectra(&dir.join(SPECTRA_FILE), &spectra)?;
        files.push(SPECTRA_FILE);
    }
    if cfg.mutual_info {
        write_minfo(&dir.join(MINFO_FILE), &minfo)?;
        files.push(MINFO_FILE);
        if matches!(cfg.n, Sites::Finite(_)) {
            write_traces(&dir.join(TRACES_FILE), &traces)?;
            files.push(TRACES_FILE);
        }
    }
    write_manifest(&dir, cfg, files, &points)?;
    Ok(SweepOutcome {
        dir,
        points,
        spectra_rows: spectra.len(),
        minfo_rows: minfo.len(),
    })
}

fn write_manifest(dir: &Path, cfg: &SweepConfig, files: Vec<&'static str>, points: &[PointRecord]) -> Result<()> {
    let mut config = cfg.clone();
    config.out = PathBuf::new();
    config.workers = 0;
    let m = Manifest {
        schema: SCHEMA,
        code_version: env!("CARGO_PKG_VERSION"),
        config_hash: cfg.physics_hash(),
        config,
        files,
        points,
    };
    let mut text = serde_json::to_string_pretty(&m)?;
    text.push('\n');
    std::fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(())
}
