use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mps_ensembles_core::circuits::{Family, Sites, TiProtocol, TruncationMode};
use mps_ensembles_core::replica::{DEFAULT_BUDGET, MAX_ORDER, MIN_ORDER};

use crate::error::{HarnessError, Result};

/// Which finite-chain sites contribute transfer spectra.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSites {
    None,
    Center,
    /// `w` consecutive sites around the center.
    Window(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub family: Family,
    #[serde(rename = "N")]
    pub n: Sites,
    pub d: usize,
    pub chi: Vec<usize>,
    pub p: Vec<f64>,
    pub r: Vec<usize>,
    pub k: usize,
    pub realizations: usize,
    /// Fixed number of circuit layers; 0 uses `depth_per_chi · χ`.
    pub depth: usize,
    pub depth_per_chi: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Thread count; 0 picks the available parallelism.
    pub workers: usize,
    pub truncation_mode: TruncationMode,
    pub ti_protocol: TiProtocol,
    pub spectrum_sites: SpectrumSites,
    pub remove_unit: bool,
    pub mutual_info: bool,
    /// Multiply-add ceiling for one replica trace.
    pub budget: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            family: Family::Monitored,
            n: Sites::Finite(24),
            d: 2,
            chi: vec![8, 16],
            p: vec![0.05, 0.10, 0.15, 0.16, 0.20, 0.30],
            r: vec![1, 2, 3, 4],
            k: 2,
            realizations: 50,
            depth: 0,
            depth_per_chi: 4,
            seed: 0,
            out: PathBuf::from("out"),
            workers: 0,
            truncation_mode: TruncationMode::default(),
            ti_protocol: TiProtocol::default(),
            spectrum_sites: SpectrumSites::Center,
            remove_unit: false,
            mutual_info: true,
            budget: DEFAULT_BUDGET,
        }
    }
}

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl SweepConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(bad("d must be at least 2"));
        }
        if self.chi.is_empty() || self.chi.contains(&0) {
            return Err(bad("chi grid must be nonempty and positive"));
        }
        if self.p.is_empty() || self.p.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(bad("p grid must be nonempty and inside [0, 1]"));
        }
        if self.family != Family::Monitored && self.p.iter().any(|&p| p != 0.0) {
            return Err(bad(format!("family {} takes no measurements; use p = 0", self.family.name())));
        }
        if self.realizations == 0 {
            return Err(bad("realizations must be at least 1"));
        }
        if self.family != Family::Rmps && self.depth == 0 && self.depth_per_chi == 0 {
            return Err(bad("depth or depth_per_chi must be positive for circuit families"));
        }
        if !(MIN_ORDER..=MAX_ORDER).contains(&self.k) {
            return Err(bad(format!("k must lie in {MIN_ORDER}..={MAX_ORDER}")));
        }
        if self.mutual_info && (self.r.is_empty() || self.r.contains(&0)) {
            return Err(bad("r grid must be nonempty and positive"));
        }
        if !(self.budget > 0.0) {
            return Err(bad("budget must be positive"));
        }
        match self.n {
            Sites::Finite(n) => {
                if n < 2 {
                    return Err(bad("N must be at least 2"));
                }
                if let Some(&r) = self.r.iter().max() {
                    if self.mutual_info && r + 2 > n {
                        return Err(bad(format!("gap {r} leaves no blocks on {n} sites")));
                    }
                }
                if let SpectrumSites::Window(w) = self.spectrum_sites {
                    if w == 0 || w > n {
                        return Err(bad(format!("spectrum window {w} outside 1..={n}")));
                    }
                }
            }
            Sites::Uniform(_) => {
                if !matches!(self.family, Family::Rmps | Family::BrickworkTi) {
                    return Err(bad(format!("uniform chains need rmps or brickwork_ti, not {}", self.family.name())));
                }
            }
        }
        Ok(())
    }

    /// Layers applied at bond dimension `chi`.
    pub fn depth_for(&self, chi: usize) -> usize {
        if self.depth > 0 {
            self.depth
        } else {
            self.depth_per_chi * chi
        }
    }

    /// Resolved worker count.
    pub fn worker_count(&self) -> usize {
        if self.workers > 0 {
            self.workers
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }

    /// SHA-256 of the fields that determine the numbers (everything except
    /// `out` and `workers`).
    pub fn physics_hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        c.workers = 0;
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Finite-chain sites whose spectra are recorded.
    pub fn spectrum_site_list(&self, n: usize) -> Vec<usize> {
        match self.spectrum_sites {
            SpectrumSites::None => vec![],
            SpectrumSites::Center => vec![n / 2],
            SpectrumSites::Window(w) => {
                let start = (n - w) / 2;
                (start..start + w).collect()
            }
        }
    }
}

/// Command-line overrides applied on top of a config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub family: Option<Family>,
    pub n: Option<usize>,
    pub chi: Option<Vec<usize>>,
    pub p: Option<Vec<f64>>,
    pub r: Option<Vec<usize>>,
    pub k: Option<usize>,
    pub depth: Option<usize>,
    pub realizations: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut SweepConfig) {
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            };
        }
        set!(seed);
        set!(out);
        set!(workers);
        set!(family);
        set!(chi);
        set!(p);
        set!(r);
        set!(k);
        set!(depth);
        set!(realizations);
        if let Some(n) = self.n {
            cfg.n = Sites::Finite(n);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        let c = SweepConfig::default();
        c.validate().unwrap();
        let back: SweepConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: SweepConfig = serde_json::from_str(r#"{"family": "rmps", "N": "uniform", "p": [0.0], "chi": [4]}"#).unwrap();
        assert_eq!(c.family, Family::Rmps);
        assert_eq!(c.k, 2);
        c.validate().unwrap();
        assert!(serde_json::from_str::<SweepConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        let cases: Vec<Box<dyn Fn(&mut SweepConfig)>> = vec![
            Box::new(|c| c.chi = vec![]),
            Box::new(|c| c.chi = vec![0]),
            Box::new(|c| c.p = vec![1.5]),
            Box::new(|c| c.realizations = 0),
            Box::new(|c| c.k = 1),
            Box::new(|c| c.r = vec![30]),
            Box::new(|c| {
                c.family = Family::Brickwork;
            }),
            Box::new(|c| c.n = Sites::Finite(1)),
            Box::new(|c| c.depth_per_chi = 0),
        ];
        for (i, f) in cases.iter().enumerate() {
            let mut c = SweepConfig::default();
            f(&mut c);
            assert!(c.validate().is_err(), "case {i}");
        }
    }

    #[test]
    fn hash_ignores_output_location_and_workers() {
        let a = SweepConfig::default();
        let mut b = a.clone();
        b.out = PathBuf::from("elsewhere");
        b.workers = 7;
        assert_eq!(a.physics_hash(), b.physics_hash());
        b.seed = 1;
        assert_ne!(a.physics_hash(), b.physics_hash());
    }

    #[test]
    fn depth_defaults_to_four_chi() {
        let mut c = SweepConfig::default();
        assert_eq!(c.depth_for(16), 64);
        c.depth = 10;
        assert_eq!(c.depth_for(16), 10);
    }

    #[test]
    fn spectrum_windows() {
        let mut c = SweepConfig::default();
        assert_eq!(c.spectrum_site_list(24), vec![12]);
        c.spectrum_sites = SpectrumSites::Window(4);
        assert_eq!(c.spectrum_site_list(24), vec![10, 11, 12, 13]);
        c.spectrum_sites = SpectrumSites::None;
        assert!(c.spectrum_site_list(24).is_empty());
    }
}
