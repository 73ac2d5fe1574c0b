use critlab_core::analysis::{fit_power_law, XMin};
use critlab_core::branching::{run_indexed, OffspringDistribution, DEFAULT_SIZE_CAP};
use critlab_core::RngStream;
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::json;

use super::{jnum, OffspringSpec, RunOutput};
use crate::error::LabResult;
use crate::output::Table;

fn default_cap() -> u64 {
    DEFAULT_SIZE_CAP
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchingParams {
    r0: f64,
    #[serde(default)]
    offspring: OffspringSpec,
    n_runs: usize,
    #[serde(default = "default_cap")]
    size_cap: u64,
    /// Lower cutoff of the tail fit; chosen by KS minimization if absent.
    #[serde(default)]
    tail_x_min: Option<f64>,
}

pub fn run(p: &BranchingParams, rng: &RngStream) -> LabResult<RunOutput> {
    let dist = OffspringDistribution::new(p.offspring.into(), p.r0)?;
    let stream = rng.substream(0);
    let records = (0..p.n_runs as u64)
        .into_par_iter()
        .map(|i| run_indexed(&dist, p.size_cap, &stream, i))
        .collect::<critlab_core::Result<Vec<_>>>()?;

    let mut table = Table::new("avalanches.csv", &["size", "duration", "capped"]);
    for a in &records {
        table.row([a.size.to_string(), a.duration.to_string(), u8::from(a.capped).to_string()]);
    }
    let n = records.len().max(1) as f64;
    let capped = records.iter().filter(|a| a.capped).count() as f64;
    let mean_size = records.iter().map(|a| a.size as f64).sum::<f64>() / n;
    let mean_duration = records.iter().map(|a| a.duration as f64).sum::<f64>() / n;
    let finite: Vec<f64> = records.iter().filter(|a| !a.capped).map(|a| a.size as f64).collect();
    let fit = fit_power_law(&finite, p.tail_x_min.map_or(XMin::Auto, XMin::Fixed));

    let mut out = RunOutput::default();
    out.stats.push("mean_size", mean_size);
    out.stats.push("expected_mean_size", if p.r0 < 1.0 { 1.0 / (1.0 - p.r0) } else { f64::NAN });
    out.stats.push("mean_duration", mean_duration);
    out.stats.push("capped_fraction", capped / n);
    out.stats.push("tail_exponent", fit.exponent);
    out.tables.push(table);
    out.doc("tail_fit.json", tail_json(&fit));
    Ok(out)
}

pub(super) fn tail_json(fit: &critlab_core::analysis::TailFit) -> serde_json::Value {
    json!({
        "exponent": jnum(fit.exponent),
        "x_min": jnum(fit.x_min),
        "n_tail": fit.n_tail,
        "ks_distance": jnum(fit.ks_distance),
        "verdict": format!("{:?}", fit.verdict).to_lowercase(),
    })
}
