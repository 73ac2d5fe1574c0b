//! Simulation engines and estimators for self-organized criticality models.
//!
//! Everything here is `no_std` + `alloc`: pure functions of their inputs and
//! an explicit [`RngStream`]. File formats, the command-line runner and
//! replica parallelism live in the `criticality-lab` crate.

#![no_std]

extern crate alloc;

pub mod analysis;
pub mod branching;
pub mod error;
pub mod glv;
pub mod inflation;
pub mod linalg;
pub mod optimize;
pub mod prodnet;
pub mod ou;
pub mod rng;
pub mod series;
pub mod special;
pub mod sweep;
pub mod timeliness;
pub mod volfeedback;

pub use error::{Error, Result};
pub use linalg::SpectrumReport;
pub use rng::RngStream;
pub use series::TimeSeries;
