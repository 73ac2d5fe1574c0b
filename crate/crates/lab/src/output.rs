//! Output files: CSV writers, JSON documents and the hashed manifest.

use std::fs::File;
use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{LabError, LabResult};

/// Shortest decimal that round-trips to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// A run directory that remembers every file written into it.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> LabResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| LabError::io_at(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Relative paths of all files written so far.
    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    pub fn adopt(&mut self, prefix: &Path, files: &[PathBuf]) {
        self.files.extend(files.iter().map(|f| prefix.join(f)));
    }

    pub fn table(&mut self, table: &Table) -> LabResult<()> {
        let path = self.root.join(&table.name);
        let mut text = String::with_capacity(table.body.len() + 64);
        text.push_str(&table.header.join(","));
        text.push('\n');
        text.push_str(&table.body);
        std::fs::write(&path, text).map_err(|e| LabError::io_at(&path, e))?;
        self.files.push(PathBuf::from(&table.name));
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> LabResult<()> {
        let path = self.root.join(name);
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| LabError::io_at(&path, e))?;
        self.files.push(PathBuf::from(name));
        Ok(())
    }

    /// Writes `manifest.json` listing every recorded file with its SHA-256.
    pub fn write_manifest(&self, command: &str, config: serde_json::Value, wall_time_s: f64) -> LabResult<()> {
        let mut files: Vec<&PathBuf> = self.files.iter().collect();
        files.sort();
        files.dedup();
        let mut entries = Vec::with_capacity(files.len());
        for rel in files {
            let path = self.root.join(rel);
            let (sha256, bytes) = hash_file(&path)?;
            entries.push(ManifestEntry {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256,
                bytes,
            });
        }
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            wall_time_s,
            files: entries,
        };
        let path = self.root.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).expect("serializable");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| LabError::io_at(&path, e))
    }
}

#[derive(Serialize)]
struct ManifestEntry {
    path: String,
    sha256: String,
    bytes: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    config: serde_json::Value,
    wall_time_s: f64,
    files: Vec<ManifestEntry>,
}

pub fn hash_file(path: &Path) -> LabResult<(String, u64)> {
    let mut f = File::open(path).map_err(|e| LabError::io_at(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = f.read(&mut buf).map_err(|e| LabError::io_at(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        total += n as u64;
    }
    Ok((hex::encode(hasher.finalize()), total))
}

/// A CSV file held in memory: header plus newline-terminated rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    body: String,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            body: String::new(),
        }
    }

    /// Appends one row of already formatted fields.
    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: std::fmt::Display,
    {
        let mut first = true;
        for f in fields {
            if !first {
                self.body.push(',');
            }
            first = false;
            let _ = write!(self.body, "{f}");
        }
        self.body.push('\n');
    }

    /// Appends a row of floats at round-trip precision.
    pub fn floats(&mut self, fields: &[f64]) {
        self.row(fields.iter().map(|x| num(*x)));
    }

    pub fn rows(&self) -> usize {
        self.body.lines().count()
    }

    /// Concatenates per-replica tables, prepending a `replica` column.
    pub fn merge_replicas(parts: Vec<Table>) -> Table {
        let mut it = parts.into_iter();
        let first = it.next().expect("at least one replica");
        let mut header = vec!["replica".to_string()];
        header.extend(first.header.iter().cloned());
        let mut out = Table {
            name: first.name.clone(),
            header,
            body: String::new(),
        };
        for (r, t) in std::iter::once(first).chain(it).enumerate() {
            for line in t.body.lines() {
                let _ = writeln!(out.body, "{r},{line}");
            }
        }
        out
    }
}

/// Numeric summary statistics of a run, in a fixed order.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Stats(pub Vec<(String, f64)>);

impl Stats {
    pub fn push(&mut self, key: &str, value: f64) {
        self.0.push((key.to_string(), value));
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut m = serde_json::Map::new();
        for (k, v) in &self.0 {
            let val = serde_json::Number::from_f64(*v).map_or(serde_json::Value::Null, serde_json::Value::Number);
            m.insert(k.clone(), val);
        }
        serde_json::Value::Object(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0, 1e-300, 123456.789, -2.5e20] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn manifest_hashes_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        let mut t = Table::new("a.csv", &["x"]);
        t.row([1]);
        out.table(&t).unwrap();
        out.write_manifest("run", serde_json::json!({}), 0.0).unwrap();
        let m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["files"][0]["path"], "a.csv");
        assert_eq!(m["files"][0]["sha256"], hex::encode(Sha256::digest(b"x\n1\n")));
        assert_eq!(m["files"][0]["bytes"], 4);
    }

    #[test]
    fn replicas_get_an_index_column() {
        let mut a = Table::new("s.csv", &["t", "x"]);
        a.floats(&[0.0, 1.5]);
        let mut b = a.clone();
        b.floats(&[1.0, 2.0]);
        let m = Table::merge_replicas(vec![a, b]);
        assert_eq!(m.header, ["replica", "t", "x"]);
        assert_eq!(m.body, "0,0.0,1.5\n1,0.0,1.5\n1,1.0,2.0\n");
        assert_eq!(m.rows(), 3);
    }
}
