//! Binary MPS container.
//!
//! Layout (all integers little-endian):
//! `MPSE` magic, `u32` version, `u64` N, `u64` d, `u8` uniform flag,
//! `i64` center (−1 for none), then `N` shapes `(u64 left, u64 d, u64 right)`,
//! then every tensor's entries in `(a, σ, b)` order as `f64` pairs `(re, im)`.
//! A JSON sidecar with the same stem holds the generating circuit spec.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{MpsState, Tensor3};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MPS_MAGIC: [u8; 4] = *b"MPSE";
pub const MPS_VERSION: u32 = 1;

pub fn write_mps<T: Real, W: Write>(state: &MpsState<T>, mut w: W) -> Result<()> {
    w.write_all(&MPS_MAGIC)?;
    w.write_all(&MPS_VERSION.to_le_bytes())?;
    w.write_all(&(state.len() as u64).to_le_bytes())?;
    w.write_all(&(state.d() as u64).to_le_bytes())?;
    w.write_all(&[state.is_uniform() as u8])?;
    let center = state.center().map_or(-1i64, |c| c as i64);
    w.write_all(&center.to_le_bytes())?;
    for t in state.tensors() {
        for dim in [t.left(), t.d(), t.right()] {
            w.write_all(&(dim as u64).to_le_bytes())?;
        }
    }
    for t in state.tensors() {
        for z in t.as_slice() {
            w.write_all(&z.re.as_f64().to_le_bytes())?;
            w.write_all(&z.im.as_f64().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated container: {e}")))?;
    Ok(buf)
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

/// Upper bound on entries accepted from a container header.
const MAX_ENTRIES: u64 = 1 << 32;

pub fn read_mps<R: Read>(mut r: R) -> Result<MpsState<f64>> {
    if read_array::<4, _>(&mut r)? != MPS_MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != MPS_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = read_u64(&mut r)?;
    let d = read_u64(&mut r)?;
    let uniform = match read_array::<1, _>(&mut r)?[0] {
        0 => false,
        1 => true,
        x => return Err(Error::Format(format!("bad uniform flag {x}"))),
    };
    let center = i64::from_le_bytes(read_array(&mut r)?);
    if n == 0 || n > MAX_ENTRIES {
        return Err(Error::Format(format!("bad site count {n}")));
    }
    let mut shapes = Vec::with_capacity(n as usize);
    let mut total = 0u64;
    for _ in 0..n {
        let (l, dd, rr) = (read_u64(&mut r)?, read_u64(&mut r)?, read_u64(&mut r)?);
        if dd != d {
            return Err(Error::Format(format!("site dimension {dd} differs from header {d}")));
        }
        total = l
            .checked_mul(dd)
            .and_then(|x| x.checked_mul(rr))
            .and_then(|x| x.checked_add(total))
            .filter(|&x| x <= MAX_ENTRIES)
            .ok_or_else(|| Error::Format("tensor sizes overflow".into()))?;
        shapes.push((l as usize, dd as usize, rr as usize));
    }
    let mut tensors = Vec::with_capacity(shapes.len());
    for (l, dd, rr) in shapes {
        let mut data = Vec::with_capacity(l * dd * rr);
        for _ in 0..l * dd * rr {
            let re = f64::from_le_bytes(read_array(&mut r)?);
            let im = f64::from_le_bytes(read_array(&mut r)?);
            data.push(Complex::new(re, im));
        }
        tensors.push(Tensor3::from_vec(l, dd, rr, data)?);
    }
    let center = if center < 0 { None } else { Some(center as usize) };
    MpsState::from_tensors(tensors, center, uniform)
}

/// Sidecar path next to a container: same stem, `.json` extension.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

#[derive(Serialize, Deserialize)]
struct Sidecar<S> {
    schema_version: u32,
    spec: S,
}

pub fn write_mps_with_sidecar<T: Real, S: Serialize>(
    state: &MpsState<T>,
    spec: &S,
    path: &Path,
) -> Result<()> {
    write_mps(state, BufWriter::new(File::create(path)?))?;
    let side = Sidecar {
        schema_version: MPS_VERSION,
        spec,
    };
    serde_json::to_writer_pretty(BufWriter::new(File::create(sidecar_path(path))?), &side)?;
    Ok(())
}

pub fn read_sidecar<S: DeserializeOwned>(path: &Path) -> Result<(MpsState<f64>, S)> {
    let state = read_mps(BufReader::new(File::open(path)?))?;
    let side: Sidecar<S> = serde_json::from_reader(BufReader::new(File::open(sidecar_path(path))?))?;
    Ok((state, side.spec))
}
