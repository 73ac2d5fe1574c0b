use std::path::{Path, PathBuf};

use critlab_core::glv::{integrate_glv, stability_report, Ecology, GlvOptions};
use critlab_core::RngStream;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{flag, jnum, resolve, RunOutput};
use crate::config::ConfigSource;
use crate::error::LabResult;
use crate::output::{num, Table};

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EcologySpec {
    Random {
        n: usize,
        sigma: f64,
        #[serde(default = "yes")]
        symmetric: bool,
    },
    File(PathBuf),
}

fn yes() -> bool {
    true
}

fn default_x0() -> f64 {
    0.5
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGlv {
    ecology: EcologySpec,
    #[serde(default = "default_x0")]
    x0: f64,
    #[serde(default)]
    dt: Option<f64>,
    #[serde(default)]
    t_max: Option<f64>,
    #[serde(default)]
    extinction_floor: Option<f64>,
}

/// The JSON form of an ecology.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EcologyFile {
    pub n: usize,
    pub mu: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub symmetric: bool,
}

impl EcologyFile {
    fn of(eco: &Ecology) -> Self {
        let n = eco.n();
        Self {
            n,
            mu: eco.mu().to_vec(),
            a: (0..n).map(|i| eco.a().row(i).iter().copied().collect()).collect(),
            symmetric: eco.symmetric(),
        }
    }
}

#[derive(Debug)]
enum Source {
    Random { n: usize, sigma: f64, symmetric: bool },
    Fixed(EcologyFile),
}

#[derive(Debug)]
pub struct Glv {
    source: Source,
    x0: f64,
    opts: GlvOptions,
}

impl Glv {
    pub fn load(raw: RawGlv, base: &Path, src: &ConfigSource) -> LabResult<Self> {
        let source = match raw.ecology {
            EcologySpec::Random { n, sigma, symmetric } => Source::Random { n, sigma, symmetric },
            EcologySpec::File(p) => {
                let path = resolve(base, &p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| src.error_at_key("file", format!("{}: {e}", path.display())))?;
                let f: EcologyFile = serde_json::from_str(&text).map_err(|e| {
                    src.error_at_key("file", format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
                })?;
                if f.mu.len() != f.n || f.a.len() != f.n || f.a.iter().any(|r| r.len() != f.n) {
                    return Err(src.error_at_key("file", format!("{}: mu and A must match n", path.display())));
                }
                Source::Fixed(f)
            }
        };
        let d = GlvOptions::default();
        Ok(Self {
            source,
            x0: raw.x0,
            opts: GlvOptions {
                dt: raw.dt.unwrap_or(d.dt),
                t_max: raw.t_max.unwrap_or(d.t_max),
                extinction_floor: raw.extinction_floor.unwrap_or(d.extinction_floor),
                ..d
            },
        })
    }
}

pub fn run(p: &Glv, rng: &RngStream) -> LabResult<RunOutput> {
    let eco = match &p.source {
        Source::Random { n, sigma, symmetric } => Ecology::random(*n, *sigma, *symmetric, &mut rng.substream(0))?,
        Source::Fixed(f) => Ecology::new(
            f.mu.clone(),
            DMatrix::from_row_iterator(f.n, f.n, f.a.iter().flatten().copied()),
            f.symmetric,
        )?,
    };
    let n = eco.n();
    let state = integrate_glv(&eco, &vec![p.x0; n], &p.opts)?;

    let mut community = Table::new("community.csv", &["species", "abundance", "survivor"]);
    for i in 0..n {
        community.row([i.to_string(), num(state.abundances[i]), u8::from(state.survivor_mask[i]).to_string()]);
    }
    let survivors = state.survivors();
    let residual = state.max_survivor_residual(eco.mu());
    let mut out = RunOutput::default();
    out.stats.push("survivors", survivors.len() as f64);
    out.stats.push("survivor_fraction", survivors.len() as f64 / n as f64);
    out.stats.push("max_residual", residual);
    out.stats.push("converged", flag(state.converged));
    let stability = if survivors.is_empty() {
        out.stats.push("kappa_star", f64::NAN);
        out.stats.push("lambda_star", f64::NAN);
        json!({ "survivors": [], "converged": state.converged })
    } else {
        let rep = stability_report(&eco, &state)?;
        out.stats.push("kappa_star", rep.kappa_star);
        out.stats.push("lambda_star", rep.lambda_star);
        json!({
            "survivors": rep.survivors,
            "converged": state.converged,
            "time": state.time,
            "max_residual": jnum(residual),
            "kappa_star": jnum(rep.kappa_star),
            "lambda_star": jnum(rep.lambda_star),
            "stable": rep.kappa_star > 0.0,
            "eigenvalues": rep.spectrum.eigenvalues.iter().map(|z| [jnum(z.re), jnum(z.im)]).collect::<Vec<_>>(),
        })
    };
    out.tables.push(community);
    out.doc("ecology.json", serde_json::to_value(EcologyFile::of(&eco)).expect("serializable"));
    out.doc("stability.json", stability);
    Ok(out)
}
