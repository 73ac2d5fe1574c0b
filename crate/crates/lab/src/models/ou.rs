use critlab_core::analysis::stats::variance;
use critlab_core::ou::{relaxation_time, simulate_multiou, simulate_ou, NoiseSpec, StabilityMatrix};
use critlab_core::RngStream;
use nalgebra::DMatrix;
use serde::Deserialize;

use super::RunOutput;
use crate::config::ConfigSource;
use crate::error::LabResult;
use crate::output::Table;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOu {
    #[serde(default)]
    kappa: Option<f64>,
    /// Stability matrix `K` of `dx/dt = -K x + noise`, row-major.
    #[serde(default)]
    k: Option<Vec<Vec<f64>>>,
    sigma: f64,
    dt: f64,
    n_steps: usize,
    #[serde(default)]
    x0: f64,
    /// Leading rows dropped from the statistics (not from the output).
    #[serde(default)]
    burn_in: usize,
}

#[derive(Debug)]
pub struct OuParams {
    dynamics: Dynamics,
    sigma: f64,
    dt: f64,
    n_steps: usize,
    x0: f64,
    burn_in: usize,
}

#[derive(Debug)]
enum Dynamics {
    Scalar(f64),
    Matrix(DMatrix<f64>),
}

impl OuParams {
    pub fn load(raw: RawOu, src: &ConfigSource) -> LabResult<Self> {
        let dynamics = match (raw.kappa, raw.k) {
            (Some(k), None) => Dynamics::Scalar(k),
            (None, Some(rows)) => {
                let n = rows.len();
                if n == 0 || rows.iter().any(|r| r.len() != n) {
                    return Err(src.error_at_key("k", "k must be a non-empty square matrix"));
                }
                Dynamics::Matrix(DMatrix::from_row_iterator(n, n, rows.into_iter().flatten()))
            }
            _ => return Err(src.error_at_key("params", "give exactly one of kappa or k")),
        };
        Ok(Self {
            dynamics,
            sigma: raw.sigma,
            dt: raw.dt,
            n_steps: raw.n_steps,
            x0: raw.x0,
            burn_in: raw.burn_in,
        })
    }
}

pub fn run(p: &OuParams, rng: &RngStream) -> LabResult<RunOutput> {
    let noise = NoiseSpec::gaussian(p.sigma)?;
    let mut r = rng.substream(0);
    let (series, expected, kappa_star) = match &p.dynamics {
        Dynamics::Scalar(kappa) => (
            simulate_ou(*kappa, noise, p.x0, p.dt, p.n_steps, &mut r)?,
            p.sigma * p.sigma / (2.0 * kappa),
            *kappa,
        ),
        Dynamics::Matrix(k) => {
            let k = StabilityMatrix::new(k.clone())?;
            let ks = k.kappa_star();
            (simulate_multiou(&k, noise, p.dt, p.n_steps, &mut r)?, f64::NAN, ks)
        }
    };
    let dim = series.dim();
    let mut header = vec!["t".to_string()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new("series.csv", &header);
    let mut row = Vec::with_capacity(dim + 1);
    for (i, x) in series.rows().enumerate() {
        row.clear();
        row.push(series.time(i));
        row.extend_from_slice(x);
        table.floats(&row);
    }

    let kept = series.skip_rows(p.burn_in);
    let mut out = RunOutput::default();
    out.stats.push("variance", variance(&kept.component_vec(0)));
    out.stats.push("expected_variance", expected);
    out.stats.push("kappa_star", kappa_star);
    // A run too short to resolve the decay still produced a valid path.
    out.stats.push("relaxation_time", relaxation_time(&kept).unwrap_or(f64::NAN));
    out.tables.push(table);
    Ok(out)
}
