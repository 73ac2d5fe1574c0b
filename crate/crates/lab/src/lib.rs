//! Config-driven experiment runner for the `critlab-core` engines.
//!
//! A run reads a strict JSON config, executes the chosen model once per
//! replica, and writes CSV/JSON outputs plus a `manifest.json` with the
//! SHA-256 of every file. A scan repeats the run over values of one
//! parameter and collects headline statistics in `summary.csv`.

pub mod config;
pub mod error;
pub mod models;
pub mod output;
pub mod runner;

pub use critlab_core as core;
pub use error::{LabError, LabResult};
pub use runner::{run, scan, RunOptions, ScanSpec};
