use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mps_ensembles::checks::oracle_checks;
use mps_ensembles::config::{Overrides, SpectrumSites, SweepConfig};
use mps_ensembles::dataset::{write_analytic, write_density, AnalyticRow, Dataset, group_spectra};
use mps_ensembles::figures::{emit_figure_data, Figure, FigureOptions};
use mps_ensembles::fit::{fit_alpha, Series};
use mps_ensembles::order::{default_rho_grid, order_parameter_scan};
use mps_ensembles::sweep::{run_sweep, SweepOutcome};
use mps_ensembles::{HarnessError, Result};
use mps_ensembles_core::circuits::Family;
use mps_ensembles_core::spectra::{radial_density, TransferSpectrum, DEFAULT_BINS};
use mps_ensembles_core::weingarten::rmps_averaged_ik;

#[derive(Parser)]
#[command(name = "mps-ensembles", version, about = "Ensembles of truncated matrix product states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct SweepArgs {
    /// JSON sweep configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// rmps, brickwork_ti, brickwork or monitored.
    #[arg(long)]
    family: Option<String>,
    /// Number of sites.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    chi: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    r: Option<Vec<usize>>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    realizations: Option<usize>,
}

impl SweepArgs {
    fn resolve(&self) -> Result<SweepConfig> {
        let mut cfg = match &self.config {
            Some(path) => SweepConfig::from_json_file(path)?,
            None => SweepConfig::default(),
        };
        let family = self
            .family
            .as_deref()
            .map(|f| f.parse::<Family>().map_err(|e| HarnessError::Config(e.to_string())))
            .transpose()?;
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            workers: self.workers,
            family,
            n: self.n,
            chi: self.chi.clone(),
            p: self.p.clone(),
            r: self.r.clone(),
            k: self.k,
            depth: self.depth,
            realizations: self.realizations,
        }
        .apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a full sweep: spectra, mutual information and manifest.
    Sweep(SweepArgs),
    /// Transfer spectra only, plus their pooled radial density.
    Spectrum {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
    },
    /// Mutual information only, or the analytic RMPS table with --analytic.
    Minfo {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long)]
        analytic: bool,
        /// Local dimension for --analytic.
        #[arg(long, default_value_t = 2)]
        d: usize,
    },
    /// Fit the exponent of mutual information against log chi.
    Fit {
        /// Sweep output directory.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        r: usize,
        #[arg(long, default_value_t = 1)]
        chi_min: usize,
        /// Write fits.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extrapolated zero-modulus weight of the transfer spectra.
    OrderParam {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',')]
        rho: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Figure bundle: fig2, fig3, fig4, figA1, figB1 or figC1.
    Figure {
        name: String,
        /// Dataset directory; figC1 takes two.
        #[arg(long)]
        data: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        r: usize,
        #[arg(long, value_delimiter = ',')]
        chi_min: Option<Vec<usize>>,
        #[arg(long)]
        no_svg: bool,
    },
    /// Cross-check independent evaluation routes.
    OracleCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn report(outcome: &SweepOutcome) -> i32 {
    eprintln!(
        "wrote {} ({} spectrum rows, {} mutual-information rows, {} failed points)",
        outcome.dir.display(),
        outcome.spectra_rows,
        outcome.minfo_rows,
        outcome.failures()
    );
    outcome.exit_code()
}

fn print_json<T: serde::Serialize>(value: &T, out: Option<&PathBuf>, name: &str) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), format!("{text}\n"))?;
    }
    println!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Sweep(args) => Ok(report(&run_sweep(&args.resolve()?)?)),
        Command::Spectrum { sweep, bins } => {
            let mut cfg = sweep.resolve()?;
            cfg.mutual_info = false;
            if cfg.spectrum_sites == SpectrumSites::None {
                cfg.spectrum_sites = SpectrumSites::Center;
            }
            let outcome = run_sweep(&cfg)?;
            let ds = Dataset::load(&outcome.dir)?;
            let pooled: Vec<TransferSpectrum> = group_spectra(&ds.spectra, true)
                .into_iter()
                .flat_map(|(_, s)| s.into_values().flatten())
                .collect();
            if let Ok(d) = radial_density(&pooled, bins) {
                write_density(&outcome.dir.join("density.csv"), &d)?;
            }
            Ok(report(&outcome))
        }
        Command::Minfo { sweep, analytic, d } => {
            let mut cfg = sweep.resolve()?;
            if analytic {
                let mut rows = Vec::new();
                for &chi in &cfg.chi {
                    for &r in &cfg.r {
                        let i_k = rmps_averaged_ik(cfg.k, d, chi, r)?;
                        rows.push(AnalyticRow { k: cfg.k, d, chi, r, i_k });
                    }
                }
                std::fs::create_dir_all(&cfg.out)?;
                let path = cfg.out.join("analytic.csv");
                write_analytic(&path, &rows)?;
                eprintln!("wrote {}", path.display());
                return Ok(0);
            }
            cfg.spectrum_sites = SpectrumSites::None;
            cfg.mutual_info = true;
            Ok(report(&run_sweep(&cfg)?))
        }
        Command::Fit { data, k, r, chi_min, out } => {
            let ds = Dataset::load(&data)?;
            let rows = ds.require_minfo()?;
            let mut ps: Vec<f64> = rows.iter().map(|x| x.p).collect();
            ps.sort_by(f64::total_cmp);
            ps.dedup();
            let mut fits = Vec::new();
            for p in ps {
                let series = Series { family: None, p, k, r };
                fits.push(serde_json::json!({ "p": p, "fits": fit_alpha(rows, &series, chi_min)? }));
            }
            print_json(&fits, out.as_ref(), "fits.json")?;
            Ok(0)
        }
        Command::OrderParam { data, rho, out } => {
            let ds = Dataset::load(&data)?;
            let table = order_parameter_scan(ds.require_spectra()?, &rho.unwrap_or_else(default_rho_grid))?;
            print_json(&table, out.as_ref(), "order.json")?;
            Ok(0)
        }
        Command::Figure { name, data, out, k, r, chi_min, no_svg } => {
            let figure: Figure = name.parse()?;
            let datasets = data.iter().map(|d| Dataset::load(d)).collect::<Result<Vec<_>>>()?;
            let opts = FigureOptions {
                k,
                r,
                chi_min: chi_min.unwrap_or_default(),
                svg: !no_svg,
                ..Default::default()
            };
            for f in emit_figure_data(figure, &datasets, &out, &opts)? {
                eprintln!("wrote {}", f.display());
            }
            Ok(0)
        }
        Command::OracleCheck { seed } => {
            let checks = oracle_checks(seed)?;
            let mut ok = true;
            for c in &checks {
                ok &= c.pass();
                println!(
                    "{} {:<32} deviation {:.3e} (tolerance {:.0e}, {} cases)",
                    if c.pass() { "PASS" } else { "FAIL" },
                    c.name,
                    c.deviation,
                    c.tolerance,
                    c.cases
                );
            }
            Ok(if ok { 0 } else { 4 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
