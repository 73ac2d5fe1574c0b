use critlab_core::analysis::stats::batch_means;
use critlab_core::volfeedback::{estimate_branching_ratio, simulate_arch, simulate_hawkes, KernelFamily, KernelKind};
use critlab_core::RngStream;
use serde::Deserialize;
use serde_json::json;

use super::{jnum, opt, KernelSpec, RunOutput};
use crate::error::LabResult;
use crate::output::{num, Table};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchParams {
    sigma0: f64,
    g: f64,
    kernel: KernelSpec,
    n_steps: usize,
}

pub fn run_arch(p: &ArchParams, rng: &RngStream) -> LabResult<RunOutput> {
    let kernel = p.kernel.build(p.g)?;
    let series = simulate_arch(p.sigma0, &kernel, p.n_steps, &mut rng.substream(0))?;
    let mut table = Table::new("returns.csv", &["t", "r"]);
    for (i, r) in series.returns.iter().enumerate() {
        table.row([i.to_string(), num(*r)]);
    }
    let (m, se) = series.mean_sigma2();
    let s0 = p.sigma0 * p.sigma0;
    let mut out = RunOutput::default();
    out.stats.push("mean_sigma2", m);
    out.stats.push("sigma2_stderr", se);
    out.stats.push("sigma_inf2", s0 / (1.0 - p.g));
    out.stats.push("amplification", m / s0);
    out.stats.push("memory", kernel.memory());
    out.tables.push(table);
    Ok(out)
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FitSpec {
    Exponential,
    PowerLaw { tau_max: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HawkesParams {
    lambda0: f64,
    g: f64,
    kernel: KernelSpec,
    t_max: f64,
    /// Refit the branching ratio with this kernel family.
    #[serde(default)]
    fit: Option<FitSpec>,
}

pub fn run_hawkes(p: &HawkesParams, rng: &RngStream) -> LabResult<RunOutput> {
    let kernel = p.kernel.build(p.g)?;
    let events = simulate_hawkes(p.lambda0, &kernel, p.t_max, &mut rng.substream(0))?;
    let mut table = Table::new("events.csv", &["t"]);
    for t in &events.times {
        table.floats(&[*t]);
    }
    // Rate error from batch means over 1000 windows of the horizon.
    let w = p.t_max / 1000.0;
    let counts: Vec<f64> = events.window_counts(w).iter().map(|c| *c as f64 / w).collect();
    let (_, rate_se) = batch_means(&counts, 50);

    let mut out = RunOutput::default();
    out.stats.push("n_events", events.times.len() as f64);
    out.stats.push("rate", events.rate());
    out.stats.push("rate_stderr", rate_se);
    out.stats.push("expected_rate", p.lambda0 / (1.0 - p.g));
    out.stats.push("mean_offspring", opt(events.mean_offspring()));
    let g_hat = match p.fit {
        None => f64::NAN,
        Some(spec) => {
            let family = match spec {
                FitSpec::Exponential => KernelFamily::Exponential,
                FitSpec::PowerLaw { tau_max } => KernelFamily::PowerLaw { tau_max },
            };
            let fit = estimate_branching_ratio(&events, family)?;
            let shape = match fit.kernel.kind {
                KernelKind::Exponential { beta } => json!({ "exponential": { "beta": jnum(beta) } }),
                KernelKind::PowerLaw { theta, tau_max } => {
                    json!({ "power_law": { "theta": jnum(theta), "tau_max": tau_max.map(jnum) } })
                }
            };
            out.doc(
                "fit.json",
                json!({
                    "g": jnum(fit.g),
                    "lambda0": jnum(fit.lambda0),
                    "kernel": shape,
                    "log_likelihood": jnum(fit.log_likelihood),
                    "n_events": events.times.len(),
                }),
            );
            fit.g
        }
    };
    out.stats.push("g_hat", g_hat);
    out.tables.push(table);
    Ok(out)
}
