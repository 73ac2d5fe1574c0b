use critlab_core::analysis::stats::ks_distance;
use critlab_core::inflation::{
    run_abm, stationary_density, supercritical_run, RepricingConfig, DEFAULT_SLOWNESS_SPREAD,
};
use critlab_core::RngStream;
use serde::Deserialize;

use super::{opt, RunOutput};
use crate::error::LabResult;
use crate::output::{num, Table};

fn minus_one() -> f64 {
    -1.0
}
fn plus_one() -> f64 {
    1.0
}
fn spread() -> f64 {
    DEFAULT_SLOWNESS_SPREAD
}
fn fifty() -> usize {
    50
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InflationParams {
    n_firms: usize,
    #[serde(default = "minus_one")]
    p_minus: f64,
    #[serde(default = "plus_one")]
    p_plus: f64,
    gamma: f64,
    #[serde(rename = "J")]
    j: f64,
    #[serde(rename = "I0")]
    i0: f64,
    dt: f64,
    #[serde(default = "spread")]
    slowness_spread: f64,
    #[serde(default)]
    burn_in: usize,
    n_steps: usize,
    /// Largest cascade processed in one step; unbounded if absent.
    #[serde(default)]
    cascade_cap: Option<u64>,
    #[serde(default = "fifty")]
    hist_bins: usize,
}

pub fn run(p: &InflationParams, rng: &RngStream) -> LabResult<RunOutput> {
    let cfg = RepricingConfig {
        n_firms: p.n_firms,
        p_minus: p.p_minus,
        p_plus: p.p_plus,
        gamma: p.gamma,
        j: p.j,
        i0: p.i0,
        dt: p.dt,
        slowness_spread: p.slowness_spread,
    };
    cfg.validate()?;
    let mut r = rng.substream(0);
    // Above J = 1 there is no stationary law to start from; use the
    // capped supercritical diagnostic instead.
    let (run, period, burn_in) = if p.j > 1.0 {
        let sc = supercritical_run(&cfg, p.n_steps as f64 * p.dt, &mut r)?;
        (sc.run, sc.dominant_period, 0)
    } else {
        (run_abm(&cfg, p.burn_in, p.n_steps, p.cascade_cap, &mut r)?, None, p.burn_in)
    };
    let closed = stationary_density(&cfg).ok();

    let mut series = Table::new("inflation.csv", &["t", "I"]);
    for (i, v) in run.inflation.component(0).enumerate() {
        series.floats(&[(burn_in + i + 1) as f64 * p.dt, v]);
    }
    let mut cascades = Table::new("cascades.csv", &["t", "size"]);
    for (t, c) in &run.cascades {
        cascades.row([num(*t), c.record.size.to_string()]);
    }
    let mut hist = Table::new("price_hist.csv", &["p_lo", "p_hi", "density", "closed_form"]);
    let bins = p.hist_bins.max(1);
    let w = (p.p_plus - p.p_minus) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in &run.final_prices {
        counts[(((x - p.p_minus) / w) as usize).min(bins - 1)] += 1;
    }
    let total = run.final_prices.len().max(1) as f64;
    for (k, c) in counts.iter().enumerate() {
        let lo = p.p_minus + k as f64 * w;
        let hi = if k + 1 == bins { p.p_plus } else { lo + w };
        let expected = closed.map_or(f64::NAN, |d| (d.cdf(hi) - d.cdf(lo)) / (hi - lo));
        hist.floats(&[lo, hi, *c as f64 / total / (hi - lo), expected]);
    }

    let mut out = RunOutput::default();
    out.stats.push("mean_inflation", run.mean_inflation());
    out.stats.push("I_st", opt(closed.map(|d| d.i_st)));
    out.stats.push("branching_ratio", run.branching_ratio());
    out.stats.push("ks_distance", closed.map_or(f64::NAN, |d| ks_distance(&run.final_prices, |x| d.cdf(x))));
    out.stats.push("n_cascades", run.cascades.len() as f64);
    out.stats.push("max_cascade", run.cascades.iter().map(|(_, c)| c.record.size).max().unwrap_or(0) as f64);
    out.stats.push("dominant_period", opt(period));
    out.tables.push(series);
    out.tables.push(cascades);
    out.tables.push(hist);
    Ok(out)
}
