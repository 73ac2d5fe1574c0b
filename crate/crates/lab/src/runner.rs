//! `run` and `scan`: replica scheduling, output layout, manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use critlab_core::rng::derive_seed;
use critlab_core::RngStream;
use rayon::prelude::*;
use serde_json::Value;

use crate::config::{ConfigSource, ExperimentConfig};
use crate::error::{LabError, LabResult};
use crate::models::{Model, RunOutput};
use crate::output::{num, OutputDir, Stats, Table};

/// Where outputs go when neither the command line nor the config says.
pub const DEFAULT_OUTPUT_DIR: &str = "critlab-out";

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub output_dir: Option<PathBuf>,
    /// Worker threads; `None` uses all cores. Never changes results.
    pub threads: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct ScanSpec {
    /// Dotted path of a scalar inside `params`.
    pub param: String,
    pub values: Vec<String>,
    /// Use the config seed for every value instead of a derived sub-seed,
    /// so that runs differ only in the scanned parameter.
    pub common_seed: bool,
}

fn pool(threads: Option<usize>) -> LabResult<rayon::ThreadPool> {
    if threads == Some(0) {
        return Err(LabError::Usage("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| LabError::Usage(format!("cannot start thread pool: {e}")))
}

fn output_root(opts: &RunOptions, cfg: &ExperimentConfig, src: &ConfigSource) -> PathBuf {
    match (&opts.output_dir, &cfg.output_dir) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) if p.is_absolute() => p.clone(),
        (None, Some(p)) => src.base_dir().join(p),
        (None, None) => PathBuf::from(DEFAULT_OUTPUT_DIR),
    }
}

/// All replicas of one experiment, ordered by replica index.
fn execute(model: &Model, seed: u64, replicas: usize) -> LabResult<Vec<RunOutput>> {
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| model.run(&RngStream::new(seed, r)))
        .collect()
}

fn mean_stats(runs: &[RunOutput]) -> Stats {
    let mut s = Stats::default();
    for (k, _) in &runs[0].stats.0 {
        let v: f64 = runs.iter().map(|r| r.stats.get(k).unwrap_or(f64::NAN)).sum();
        s.push(k, v / runs.len() as f64);
    }
    s
}

/// Writes tables, documents and `summary.json` for one experiment and
/// returns the averaged headline statistics.
fn write_outputs(dir: &mut OutputDir, runs: Vec<RunOutput>) -> LabResult<Stats> {
    let stats = mean_stats(&runs);
    if runs.len() == 1 {
        let run = runs.into_iter().next().expect("one replica");
        for t in &run.tables {
            dir.table(t)?;
        }
        for (name, doc) in &run.docs {
            dir.json(name, doc)?;
        }
        dir.json("summary.json", &serde_json::json!({ "stats": run.stats.to_json() }))?;
        return Ok(stats);
    }
    let mut tables: BTreeMap<String, Vec<Table>> = BTreeMap::new();
    let mut docs: BTreeMap<String, Vec<Value>> = BTreeMap::new();
    let mut per_replica = Vec::with_capacity(runs.len());
    for run in runs {
        for t in run.tables {
            tables.entry(t.name.clone()).or_default().push(t);
        }
        for (name, doc) in run.docs {
            docs.entry(name).or_default().push(doc);
        }
        per_replica.push(run.stats.to_json());
    }
    for parts in tables.into_values() {
        dir.table(&Table::merge_replicas(parts))?;
    }
    for (name, list) in docs {
        dir.json(&name, &list)?;
    }
    dir.json(
        "summary.json",
        &serde_json::json!({ "mean": stats.to_json(), "replicas": per_replica }),
    )?;
    Ok(stats)
}

/// `criticality-lab run`. Returns the output directory.
pub fn run(config: &Path, opts: &RunOptions) -> LabResult<PathBuf> {
    let start = Instant::now();
    let src = ConfigSource::load(config)?;
    let cfg = ExperimentConfig::parse(&src)?;
    let model = Model::from_config(&cfg, &src)?;
    let root = output_root(opts, &cfg, &src);
    let runs = pool(opts.threads)?.install(|| execute(&model, cfg.seed, cfg.replicas))?;
    let mut dir = OutputDir::create(&root)?;
    write_outputs(&mut dir, runs)?;
    dir.write_manifest("run", cfg.echo(), start.elapsed().as_secs_f64())?;
    Ok(root)
}

/// Parses a `--values` entry: JSON if possible (numbers, booleans), a
/// string otherwise.
fn scan_value(v: &str) -> Value {
    serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()))
}

/// `criticality-lab scan`. Returns the output directory.
pub fn scan(config: &Path, spec: &ScanSpec, opts: &RunOptions) -> LabResult<PathBuf> {
    let start = Instant::now();
    let values: Vec<&str> = spec.values.iter().map(|v| v.trim()).filter(|v| !v.is_empty()).collect();
    if values.is_empty() {
        return Err(LabError::Usage("--values must list at least one value".into()));
    }
    let src = ConfigSource::load(config)?;
    let base = ExperimentConfig::parse(&src)?;
    // Every point is validated before any work starts.
    let mut points = Vec::with_capacity(values.len());
    for (i, v) in values.iter().enumerate() {
        let mut cfg = base.clone();
        cfg.set_param(&src, &spec.param, scan_value(v))?;
        if !spec.common_seed {
            cfg.seed = derive_seed(base.seed, i as u64);
        }
        let model = Model::from_config(&cfg, &src)?;
        points.push((format!("{}={}", spec.param, v), cfg, model));
    }
    let root = output_root(opts, &base, &src);
    let results = pool(opts.threads)?.install(|| {
        points
            .par_iter()
            .map(|(_, cfg, model)| execute(model, cfg.seed, cfg.replicas))
            .collect::<LabResult<Vec<_>>>()
    })?;

    let mut top = OutputDir::create(&root)?;
    let mut summary: Option<Table> = None;
    for ((name, cfg, _), runs) in points.iter().zip(results) {
        let sub = root.join(name);
        let mut dir = OutputDir::create(&sub)?;
        let stats = write_outputs(&mut dir, runs)?;
        dir.write_manifest("run", cfg.echo(), 0.0)?;
        top.adopt(Path::new(name), dir.files());
        top.adopt(Path::new(name), &[PathBuf::from("manifest.json")]);
        let value = &name[spec.param.len() + 1..];
        let table = summary.get_or_insert_with(|| {
            let mut header = vec![spec.param.as_str(), "seed"];
            header.extend(stats.0.iter().map(|(k, _)| k.as_str()));
            Table::new("summary.csv", &header)
        });
        let mut row = vec![value.to_string(), cfg.seed.to_string()];
        row.extend(stats.0.iter().map(|(_, v)| num(*v)));
        table.row(row);
    }
    top.table(&summary.expect("at least one value"))?;
    let mut echo = base.echo();
    echo["scan"] = serde_json::json!({
        "param": spec.param,
        "values": values,
        "common_seed": spec.common_seed,
    });
    top.write_manifest("scan", echo, start.elapsed().as_secs_f64())?;
    Ok(root)
}
