//! Experiment harness for the perturbed KdV averaging laboratory.
//!
//! Reads a TOML experiment description, runs ensembles in parallel with a
//! deterministic ordered reduction, and writes CSV tables (each headed by a
//! comment carrying the schema version and the config hash), a manifest and
//! gnuplot scripts. The numerics live in `kdvlab_core`.

pub mod acceptance;
pub mod config;
mod error;
pub mod output;
pub mod plots;
pub mod qi;
pub mod simulate;
pub mod sweep;

pub use config::ExperimentConfig;
pub use error::{LabError, LabResult};
