//! Experiment harness: config-driven ensemble sweeps, exponent fits, the
//! transfer-spectrum order parameter and figure bundles.

pub mod cache;
pub mod checks;
pub mod config;
pub mod dataset;
pub mod error;
pub mod figures;
pub mod fit;
pub mod order;
pub mod svg;
pub mod sweep;

pub use config::SweepConfig;
pub use error::{HarnessError, Result};
