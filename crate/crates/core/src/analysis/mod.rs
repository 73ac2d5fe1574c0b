//! Statistics shared by all models: tail fits, autocorrelation, histograms.

pub mod acf;
pub mod hist;
pub mod powerlaw;
pub mod stats;

pub use acf::{autocorrelation, decay_time};
pub use hist::{log_binned_histogram, LogBin};
pub use powerlaw::{
    fit_discrete_window, fit_power_law, fit_power_law_window, TailFit, TailVerdict, WindowFit,
    XMin, MIN_TAIL,
};
