use std::path::{Path, PathBuf};

use critlab_core::prodnet::{feasibility, firm_entry_experiment, EntrantSpec, FirmNetwork};
use critlab_core::RngStream;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{flag, jnum, resolve, RunOutput};
use crate::config::ConfigSource;
use crate::error::LabResult;
use crate::output::Table;

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSpec {
    RandomLeontief { n: usize, k: usize, z: f64, j_weight: f64 },
    File(PathBuf),
}

fn zero() -> f64 {
    0.0
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntrySpec {
    n_entries: usize,
    z_mean: f64,
    #[serde(default = "zero")]
    z_spread: f64,
    suppliers: usize,
    customers: usize,
    j_weight: f64,
    customer_share: f64,
    #[serde(default)]
    preferential: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawProdnet {
    network: NetworkSpec,
    #[serde(default)]
    entry: Option<EntrySpec>,
}

/// The JSON form of a firm network.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub n: usize,
    pub q: f64,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub a0: Vec<f64>,
    #[serde(rename = "J")]
    pub j: Vec<Vec<f64>>,
    #[serde(rename = "J0")]
    pub j0: Vec<f64>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl NetworkFile {
    fn of(net: &FirmNetwork) -> Self {
        Self {
            n: net.n(),
            q: net.q,
            z: net.z.clone(),
            w: net.w.clone(),
            a: rows(&net.a),
            a0: net.a0.clone(),
            j: rows(&net.j),
            j0: net.j0.clone(),
        }
    }

    fn shapes_ok(&self) -> bool {
        let n = self.n;
        let square = |m: &Vec<Vec<f64>>| m.len() == n && m.iter().all(|r| r.len() == n);
        self.z.len() == n && self.w.len() == n && self.a0.len() == n && self.j0.len() == n && square(&self.a) && square(&self.j)
    }

    fn network(&self) -> FirmNetwork {
        let n = self.n;
        FirmNetwork {
            q: self.q,
            z: self.z.clone(),
            w: self.w.clone(),
            a: DMatrix::from_row_iterator(n, n, self.a.iter().flatten().copied()),
            a0: self.a0.clone(),
            j: DMatrix::from_row_iterator(n, n, self.j.iter().flatten().copied()),
            j0: self.j0.clone(),
        }
    }
}

#[derive(Debug)]
enum Source {
    Random { n: usize, k: usize, z: f64, j_weight: f64 },
    Fixed(FirmNetwork),
}

#[derive(Debug)]
pub struct Prodnet {
    source: Source,
    entry: Option<EntrySpec>,
}

impl Prodnet {
    pub fn load(raw: RawProdnet, base: &Path, src: &ConfigSource) -> LabResult<Self> {
        let source = match raw.network {
            NetworkSpec::RandomLeontief { n, k, z, j_weight } => Source::Random { n, k, z, j_weight },
            NetworkSpec::File(p) => {
                let path = resolve(base, &p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| src.error_at_key("file", format!("{}: {e}", path.display())))?;
                let f: NetworkFile = serde_json::from_str(&text).map_err(|e| {
                    src.error_at_key("file", format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
                })?;
                if !f.shapes_ok() {
                    return Err(src.error_at_key("file", format!("{}: array sizes must match n", path.display())));
                }
                Source::Fixed(f.network())
            }
        };
        Ok(Self { source, entry: raw.entry })
    }
}

pub fn run(p: &Prodnet, rng: &RngStream) -> LabResult<RunOutput> {
    let net = match &p.source {
        Source::Random { n, k, z, j_weight } => FirmNetwork::random_leontief(*n, *k, *z, *j_weight, &mut rng.substream(0))?,
        Source::Fixed(net) => {
            net.validate()?;
            net.clone()
        }
    };
    let rep = feasibility(&net)?;
    let mut out = RunOutput::default();
    out.stats.push("n_firms", net.n() as f64);
    out.stats.push("min_real_part", rep.spectrum.min_real_part);
    out.stats.push("feasible", flag(rep.spectrum.is_m_matrix));
    out.stats.push("inverse_min", rep.inverse_min.unwrap_or(f64::NAN));
    out.doc("network.json", serde_json::to_value(NetworkFile::of(&net)).expect("serializable"));
    out.doc(
        "feasibility.json",
        json!({
            "n": net.n(),
            "q": net.q,
            "feasible": rep.spectrum.is_m_matrix,
            "min_real_part": jnum(rep.spectrum.min_real_part),
            "eigenvalues": rep.spectrum.eigenvalues.iter().map(|z| [jnum(z.re), jnum(z.im)]).collect::<Vec<_>>(),
            "prices": rep.prices.as_ref().map(|p| p.iter().map(|v| jnum(*v)).collect::<Vec<_>>()),
            "inverse_min": rep.inverse_min.map(jnum),
        }),
    );

    let mut last = f64::NAN;
    if let Some(e) = p.entry {
        let spec = EntrantSpec {
            z_mean: e.z_mean,
            z_spread: e.z_spread,
            suppliers: e.suppliers,
            customers: e.customers,
            j_weight: e.j_weight,
            customer_share: e.customer_share,
            preferential: e.preferential,
        };
        let path = firm_entry_experiment(&net, &spec, e.n_entries, &mut rng.substream(1))?;
        let mut table = Table::new("entry.csv", &["entrants", "min_real_part"]);
        for (i, v) in path.component(0).enumerate() {
            table.row([i.to_string(), crate::output::num(v)]);
            last = v;
        }
        out.tables.push(table);
    }
    out.stats.push("final_min_real_part", last);
    Ok(out)
}
