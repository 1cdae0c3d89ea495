//! Ensembles of truncated matrix product states.
//!
//! The numerical core is generic over the real scalar `T: Real` (`f32` or
//! `f64`). The aliases below fix `T = f64`, which is what the experiment
//! harness uses.

pub mod circuits;
pub mod error;
pub mod linalg;
pub mod mps;
pub mod oracle;
pub mod perm;
pub mod replica;
pub mod rng;
pub mod scalar;
pub mod spectra;
pub mod weingarten;

pub use error::{Error, Result};
pub use scalar::Real;

pub type C64 = num_complex::Complex<f64>;
pub type ComplexMatrix64 = linalg::ComplexMatrix<f64>;
pub type Tensor3F64 = mps::Tensor3<f64>;
pub type MpsState64 = mps::MpsState<f64>;
pub type UniformCanonical64 = mps::uniform::UniformCanonical<f64>;
