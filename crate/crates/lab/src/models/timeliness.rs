use std::path::{Path, PathBuf};

use critlab_core::timeliness::{
    delay_avalanches, drift_statistic, find_critical_buffer, run_delays, DelayNoise, TaskNetwork,
};
use critlab_core::RngStream;
use serde::Deserialize;

use super::{resolve, RunOutput};
use crate::config::ConfigSource;
use crate::error::LabResult;
use crate::output::{num, Table};

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSpec {
    Chain { n: usize },
    RandomRegular { n: usize, k: usize },
    DagLayered { layers: usize, width: usize, k: usize },
    /// Edge list CSV with header `src,dst`; `dst` waits for `src`.
    Edges {
        file: PathBuf,
        #[serde(default)]
        n: Option<usize>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalSearch {
    b_lo: f64,
    b_hi: f64,
    n_steps: usize,
    tol: f64,
}

fn one() -> f64 {
    1.0
}
fn one_step() -> usize {
    1
}
fn three() -> f64 {
    3.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTimeliness {
    network: NetworkSpec,
    buffer: f64,
    #[serde(default = "one")]
    noise_mean: f64,
    n_steps: usize,
    /// Write every k-th iteration to `delays.csv`.
    #[serde(default = "one_step")]
    record_every: usize,
    /// Episode threshold as a multiple of the median delay.
    #[serde(default = "three")]
    episode_q: f64,
    #[serde(default)]
    critical: Option<CriticalSearch>,
}

#[derive(Debug)]
enum Net {
    Generated(NetworkSpec),
    Loaded(TaskNetwork),
}

#[derive(Debug)]
pub struct Timeliness {
    net: Net,
    raw: RawTimeliness,
}

#[derive(Deserialize)]
struct Edge {
    src: usize,
    dst: usize,
}

fn read_edges(path: &Path) -> Result<Vec<(usize, usize)>, String> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    if headers.iter().collect::<Vec<_>>() != ["src", "dst"] {
        return Err("header must be src,dst".into());
    }
    reader
        .deserialize::<Edge>()
        .map(|r| r.map(|e| (e.src, e.dst)).map_err(|e| e.to_string()))
        .collect()
}

impl Timeliness {
    pub fn load(mut raw: RawTimeliness, base: &Path, src: &ConfigSource) -> LabResult<Self> {
        if raw.record_every == 0 {
            return Err(src.error_at_key("record_every", "record_every must be at least 1"));
        }
        let spec = std::mem::replace(&mut raw.network, NetworkSpec::Chain { n: 0 });
        let net = match spec {
            NetworkSpec::Edges { file, n } => {
                let path = resolve(base, &file);
                let edges =
                    read_edges(&path).map_err(|e| src.error_at_key("file", format!("{}: {e}", path.display())))?;
                let n = n.unwrap_or_else(|| edges.iter().map(|&(s, d)| s.max(d) + 1).max().unwrap_or(0));
                Net::Loaded(
                    TaskNetwork::from_edges(n, &edges)
                        .map_err(|e| src.error_at_key("file", format!("{}: {e}", path.display())))?,
                )
            }
            other => Net::Generated(other),
        };
        Ok(Self { net, raw })
    }
}

pub fn run(p: &Timeliness, rng: &RngStream) -> LabResult<RunOutput> {
    let raw = &p.raw;
    let net = match &p.net {
        Net::Loaded(net) => net.clone(),
        Net::Generated(spec) => {
            let mut r = rng.substream(0);
            match *spec {
                NetworkSpec::Chain { n } => TaskNetwork::chain(n)?,
                NetworkSpec::RandomRegular { n, k } => TaskNetwork::random_regular(n, k, &mut r)?,
                NetworkSpec::DagLayered { layers, width, k } => TaskNetwork::dag_layered(layers, width, k, &mut r)?,
                NetworkSpec::Edges { .. } => unreachable!("edge lists are loaded up front"),
            }
        }
    };
    let noise = DelayNoise::exponential(raw.noise_mean)?;
    // One noise stream, replayed by every analysis below.
    let stream = rng.substream(1);

    let mut delays = Table::new("delays.csv", &["n", "node", "tau"]);
    let final_tau = run_delays(&net, raw.buffer, &noise, &vec![0.0; net.n()], raw.n_steps, &mut stream.clone(), |it, tau| {
        if it as usize % raw.record_every == 0 {
            for (node, t) in tau.iter().enumerate() {
                delays.row([it.to_string(), node.to_string(), num(*t)]);
            }
        }
    })?;
    let report = delay_avalanches(&net, raw.buffer, &noise, raw.n_steps, raw.episode_q, &stream)?;
    let mut episodes = Table::new("episodes.csv", &["start", "duration", "sites", "size"]);
    for e in &report.episodes {
        episodes.row([e.start.to_string(), e.duration.to_string(), e.sites.to_string(), num(e.size)]);
    }
    let mut edges = Table::new("network.csv", &["src", "dst"]);
    for (s, d) in net.edges() {
        edges.row([s, d]);
    }

    let mut out = RunOutput::default();
    out.stats.push("mean_delay", final_tau.iter().sum::<f64>() / net.n() as f64);
    let drift = if raw.n_steps >= 20 {
        drift_statistic(&net, raw.buffer, &noise, raw.n_steps, &mut stream.clone())?
    } else {
        f64::NAN
    };
    out.stats.push("drift", drift);
    out.stats.push("n_episodes", report.episodes.len() as f64);
    out.stats.push("episode_threshold", report.threshold);
    let b_c = match &raw.critical {
        Some(c) => find_critical_buffer(&net, &noise, (c.b_lo, c.b_hi), c.n_steps, c.tol, &stream)?,
        None => f64::NAN,
    };
    out.stats.push("critical_buffer", b_c);
    out.tables.push(delays);
    out.tables.push(episodes);
    out.tables.push(edges);
    Ok(out)
}
