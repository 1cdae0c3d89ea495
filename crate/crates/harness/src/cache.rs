//! Optional on-disk reuse of generated states, keyed by the SHA-256 of the
//! generating `CircuitSpec`. Enabled by setting `MPS_ENSEMBLES_CACHE` to a
//! directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mps_ensembles_core::circuits::CircuitSpec;
use mps_ensembles_core::mps::uniform::UniformCanonical;
use mps_ensembles_core::mps::{read_sidecar, sidecar_path, write_mps_with_sidecar, MpsState};

pub const CACHE_ENV: &str = "MPS_ENSEMBLES_CACHE";

#[derive(Serialize, Deserialize)]
struct Entry {
    spec: CircuitSpec,
    /// Cell Schmidt values; empty for finite chains.
    schmidt: Vec<Vec<f64>>,
    eta: f64,
}

#[derive(Clone, Debug)]
pub struct StateCache {
    dir: PathBuf,
}

impl StateCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// Cache rooted at `$MPS_ENSEMBLES_CACHE`, if set and nonempty.
    pub fn from_env() -> Option<Self> {
        std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(Self::new)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(spec: &CircuitSpec) -> String {
        let text = serde_json::to_string(spec).expect("spec serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    fn path(&self, spec: &CircuitSpec) -> PathBuf {
        self.dir.join(format!("{}.mps", Self::key(spec)))
    }

    fn load(&self, spec: &CircuitSpec) -> Option<(MpsState<f64>, Entry)> {
        let path = self.path(spec);
        if !path.exists() {
            return None;
        }
        let (state, entry): (MpsState<f64>, Entry) = read_sidecar(&path).ok()?;
        (entry.spec == *spec).then_some((state, entry))
    }

    /// Best effort; write failures are ignored.
    fn store(&self, spec: &CircuitSpec, state: &MpsState<f64>, schmidt: Vec<Vec<f64>>, eta: f64) {
        let _ = self.try_store(spec, state, Entry { spec: spec.clone(), schmidt, eta });
    }

    fn try_store(&self, spec: &CircuitSpec, state: &MpsState<f64>, entry: Entry) -> std::io::Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let final_path = self.path(spec);
        let tmp = self.dir.join(format!(
            "{}.{}.tmp.mps",
            Self::key(spec),
            std::process::id()
        ));
        write_mps_with_sidecar(state, &entry, &tmp).map_err(std::io::Error::other)?;
        std::fs::rename(sidecar_path(&tmp), sidecar_path(&final_path))?;
        std::fs::rename(&tmp, &final_path)
    }

    pub fn finite(&self, spec: &CircuitSpec) -> Option<MpsState<f64>> {
        self.load(spec).map(|(s, _)| s)
    }

    pub fn store_finite(&self, spec: &CircuitSpec, state: &MpsState<f64>) {
        self.store(spec, state, Vec::new(), 1.0);
    }

    pub fn uniform(&self, spec: &CircuitSpec) -> Option<UniformCanonical<f64>> {
        self.load(spec).map(|(state, e)| UniformCanonical {
            state,
            schmidt: e.schmidt,
            eta: e.eta,
        })
    }

    pub fn store_uniform(&self, spec: &CircuitSpec, cell: &UniformCanonical<f64>) {
        self.store(spec, &cell.state, cell.schmidt.clone(), cell.eta);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mps_ensembles_core::circuits::{generate_finite, run_uniform_ti, Family};

    #[test]
    fn finite_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cache = StateCache::new(dir.path());
        let spec = CircuitSpec::new(Family::Brickwork, 6, 2, 4, 3, 11);
        assert!(cache.finite(&spec).is_none());
        let (state, _) = generate_finite::<f64>(&spec).unwrap();
        cache.store_finite(&spec, &state);
        let back = cache.finite(&spec).unwrap();
        for i in 0..state.len() {
            assert_eq!(back.tensor(i), state.tensor(i));
        }
        assert!(cache.finite(&spec.clone().with_realization(1)).is_none());
    }

    #[test]
    fn uniform_roundtrip_keeps_schmidt_values() {
        let dir = tempfile::tempdir().unwrap();
        let cache = StateCache::new(dir.path());
        let spec = CircuitSpec::uniform(Family::Rmps, 2, 3, 1, 5);
        let cell = run_uniform_ti::<f64>(&spec, &mut spec.rng()).unwrap();
        cache.store_uniform(&spec, &cell);
        let back = cache.uniform(&spec).unwrap();
        assert_eq!(back.schmidt, cell.schmidt);
        assert_eq!(back.eta.to_bits(), cell.eta.to_bits());
        assert_eq!(back.state.tensor(0), cell.state.tensor(0));
    }
}
