//! One runner per model: typed parameters in, tables, documents and
//! headline statistics out.

use std::path::{Path, PathBuf};

use critlab_core::branching::OffspringKind;
use critlab_core::volfeedback::FeedbackKernel;
use critlab_core::RngStream;
use serde::Deserialize;
use serde_json::Value;

use crate::config::{ConfigSource, ExperimentConfig, ModelKind};
use crate::error::LabResult;
use crate::output::{Stats, Table};

mod branching;
mod glv;
mod inflation;
mod ou;
mod prodnet;
mod sweep;
mod timeliness;
mod volatility;

/// Everything one replica produces, before it touches the disk.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    pub docs: Vec<(String, Value)>,
    pub stats: Stats,
}

impl RunOutput {
    fn doc(&mut self, name: &str, value: Value) {
        self.docs.push((name.to_string(), value));
    }
}

/// Parameters of one experiment, checked and with input files loaded.
#[derive(Debug)]
pub enum Model {
    Ou(ou::OuParams),
    Branching(branching::BranchingParams),
    Sweep(sweep::SweepParams),
    Glv(glv::Glv),
    Timeliness(timeliness::Timeliness),
    Prodnet(prodnet::Prodnet),
    Inflation(inflation::InflationParams),
    Arch(volatility::ArchParams),
    Hawkes(volatility::HawkesParams),
}

impl Model {
    pub fn from_config(cfg: &ExperimentConfig, src: &ConfigSource) -> LabResult<Self> {
        let base = src.base_dir();
        Ok(match cfg.model {
            ModelKind::Ou => Model::Ou(ou::OuParams::load(cfg.typed_params(src)?, src)?),
            ModelKind::Branching => Model::Branching(cfg.typed_params(src)?),
            ModelKind::Sweep => Model::Sweep(cfg.typed_params(src)?),
            ModelKind::Glv => Model::Glv(glv::Glv::load(cfg.typed_params(src)?, &base, src)?),
            ModelKind::Timeliness => {
                Model::Timeliness(timeliness::Timeliness::load(cfg.typed_params(src)?, &base, src)?)
            }
            ModelKind::Prodnet => Model::Prodnet(prodnet::Prodnet::load(cfg.typed_params(src)?, &base, src)?),
            ModelKind::Inflation => Model::Inflation(cfg.typed_params(src)?),
            ModelKind::Arch => Model::Arch(cfg.typed_params(src)?),
            ModelKind::Hawkes => Model::Hawkes(cfg.typed_params(src)?),
        })
    }

    /// Runs one replica. All randomness comes from `rng` and its
    /// substreams; inner parallel loops are indexed, so results do not
    /// depend on the thread count.
    pub fn run(&self, rng: &RngStream) -> LabResult<RunOutput> {
        match self {
            Model::Ou(p) => ou::run(p, rng),
            Model::Branching(p) => branching::run(p, rng),
            Model::Sweep(p) => sweep::run(p, rng),
            Model::Glv(p) => glv::run(p, rng),
            Model::Timeliness(p) => timeliness::run(p, rng),
            Model::Prodnet(p) => prodnet::run(p, rng),
            Model::Inflation(p) => inflation::run(p, rng),
            Model::Arch(p) => volatility::run_arch(p, rng),
            Model::Hawkes(p) => volatility::run_hawkes(p, rng),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OffspringSpec {
    #[default]
    Poisson,
    BernoulliPair,
    Geometric,
    ZetaTail { alpha: f64 },
}

impl From<OffspringSpec> for OffspringKind {
    fn from(s: OffspringSpec) -> Self {
        match s {
            OffspringSpec::Poisson => OffspringKind::Poisson,
            OffspringSpec::BernoulliPair => OffspringKind::BernoulliPair,
            OffspringSpec::Geometric => OffspringKind::Geometric,
            OffspringSpec::ZetaTail { alpha } => OffspringKind::ZetaTail { alpha },
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Exponential { beta: f64 },
    PowerLaw {
        theta: f64,
        #[serde(default)]
        tau_max: Option<f64>,
    },
}

impl KernelSpec {
    fn build(self, g: f64) -> critlab_core::Result<FeedbackKernel> {
        match self {
            KernelSpec::Exponential { beta } => FeedbackKernel::exponential(g, beta),
            KernelSpec::PowerLaw { theta, tau_max } => FeedbackKernel::power_law(g, theta, tau_max),
        }
    }
}

/// Resolves a path from the config against the config's directory.
fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn opt(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::NAN)
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// JSON number, or null for non-finite values.
fn jnum(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}
