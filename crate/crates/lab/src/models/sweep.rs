use critlab_core::analysis::stats::{ks_distance, mean};
use critlab_core::sweep::{simulate_sweep, stationary_slope_density, SweepConfig};
use critlab_core::RngStream;
use serde::Deserialize;

use super::{OffspringSpec, RunOutput};
use crate::error::LabResult;
use crate::output::{num, Table};

fn default_size() -> u64 {
    10_000_000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    mu: f64,
    gamma: f64,
    dt: f64,
    t_max: f64,
    #[serde(default = "default_size")]
    system_size: u64,
    #[serde(default)]
    offspring: OffspringSpec,
    /// Initial part of the slope path excluded from the KS statistic.
    #[serde(default)]
    burn_in: f64,
}

pub fn run(p: &SweepParams, rng: &RngStream) -> LabResult<RunOutput> {
    let cfg = SweepConfig {
        mu: p.mu,
        gamma: p.gamma,
        dt: p.dt,
        system_size: p.system_size,
        offspring: p.offspring.into(),
    };
    let sim = simulate_sweep(&cfg, p.t_max, &mut rng.substream(0))?;

    let mut path = Table::new("r0_path.csv", &["t", "r0"]);
    for (i, r) in sim.r0_path.component(0).enumerate() {
        path.floats(&[sim.r0_path.time(i), r]);
    }
    let mut aval = Table::new("avalanches.csv", &["t", "r0_at_trigger", "size", "duration", "landslide"]);
    for e in &sim.events {
        aval.row([
            num(e.t),
            num(e.r0),
            e.avalanche.size.to_string(),
            e.avalanche.duration.to_string(),
            u8::from(e.landslide()).to_string(),
        ]);
    }

    let skip = (p.burn_in / p.dt).ceil() as usize;
    let slopes = sim.r0_path.skip_rows(skip).component_vec(0);
    let density = stationary_slope_density(&cfg)?;
    let n_events = sim.events.len() as f64;
    let landslides = sim.events.iter().filter(|e| e.landslide()).count() as f64;
    let sizes: Vec<f64> = sim.events.iter().map(|e| e.avalanche.size as f64).collect();

    let mut out = RunOutput::default();
    out.stats.push("mean_r0", mean(&slopes));
    out.stats.push("ks_distance", ks_distance(&slopes, |x| density.cdf(x)));
    out.stats.push("n_events", n_events);
    out.stats.push("mean_size", mean(&sizes));
    out.stats.push("landslide_fraction", if n_events > 0.0 { landslides / n_events } else { f64::NAN });
    out.tables.push(path);
    out.tables.push(aval);
    Ok(out)
}
