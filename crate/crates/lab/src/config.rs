//! Strict JSON experiment configs with line-anchored errors.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::value::RawValue;
use serde_json::Value;

use crate::error::{LabError, LabResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ou,
    Branching,
    Sweep,
    Glv,
    Timeliness,
    Prodnet,
    Inflation,
    Arch,
    Hawkes,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ou => "ou",
            ModelKind::Branching => "branching",
            ModelKind::Sweep => "sweep",
            ModelKind::Glv => "glv",
            ModelKind::Timeliness => "timeliness",
            ModelKind::Prodnet => "prodnet",
            ModelKind::Inflation => "inflation",
            ModelKind::Arch => "arch",
            ModelKind::Hawkes => "hawkes",
        }
    }
}

/// The config file text, kept for error anchoring.
#[derive(Clone, Debug)]
pub struct ConfigSource {
    pub path: PathBuf,
    pub text: String,
}

impl ConfigSource {
    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io_at(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            text,
        })
    }

    pub fn from_text(path: impl Into<PathBuf>, text: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            text: text.into(),
        }
    }

    /// Directory that relative paths inside the config resolve against.
    pub fn base_dir(&self) -> PathBuf {
        self.path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    }

    fn position(&self, offset: usize) -> (usize, usize) {
        let before = &self.text[..offset.min(self.text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
        (line, column)
    }

    pub fn error(&self, line: usize, column: usize, message: impl Into<String>) -> LabError {
        LabError::Config {
            path: self.path.display().to_string(),
            line,
            column,
            message: message.into(),
        }
    }

    pub fn error_at_offset(&self, offset: usize, message: impl Into<String>) -> LabError {
        let (l, c) = self.position(offset);
        self.error(l, c, message)
    }

    /// Error anchored at the first occurrence of `"key"` (or line 1).
    pub fn error_at_key(&self, key: &str, message: impl Into<String>) -> LabError {
        let offset = self.text.find(&format!("\"{key}\"")).unwrap_or(0);
        self.error_at_offset(offset, message)
    }

    fn json_error(&self, e: &serde_json::Error) -> LabError {
        self.error(e.line().max(1), e.column().max(1), strip_position(&e.to_string()))
    }
}

// serde_json appends " at line L column C"; the anchor carries that already.
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig<'a> {
    model: ModelKind,
    #[serde(borrow)]
    params: &'a RawValue,
    seed: u64,
    #[serde(default = "one")]
    replicas: usize,
    #[serde(default)]
    output_dir: Option<PathBuf>,
}

fn one() -> usize {
    1
}

/// A parsed experiment. `params` stays untyped until the model is known.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub seed: u64,
    pub replicas: usize,
    pub output_dir: Option<PathBuf>,
    pub params: Value,
    /// Byte span of `params` in the source while it is unmodified.
    params_span: Option<(usize, usize)>,
    params_offset: usize,
}

impl ExperimentConfig {
    pub fn parse(src: &ConfigSource) -> LabResult<Self> {
        let raw: RawConfig = serde_json::from_str(&src.text).map_err(|e| src.json_error(&e))?;
        if raw.replicas == 0 {
            return Err(src.error_at_key("replicas", "replicas must be at least 1"));
        }
        let text = raw.params.get();
        let start = text.as_ptr() as usize - src.text.as_ptr() as usize;
        if !text.starts_with('{') {
            return Err(src.error_at_offset(start, "params must be a JSON object"));
        }
        let params: Value = serde_json::from_str(text).map_err(|e| src.json_error(&e))?;
        Ok(Self {
            model: raw.model,
            seed: raw.seed,
            replicas: raw.replicas,
            output_dir: raw.output_dir,
            params,
            params_span: Some((start, start + text.len())),
            params_offset: start,
        })
    }

    /// Typed model parameters. Errors point into the config file.
    pub fn typed_params<P: DeserializeOwned>(&self, src: &ConfigSource) -> LabResult<P> {
        match self.params_span {
            Some((a, b)) => serde_json::from_str(&src.text[a..b]).map_err(|e| {
                let (l0, c0) = src.position(a);
                let (l, c) = if e.line() <= 1 {
                    (l0, c0 + e.column().max(1) - 1)
                } else {
                    (l0 + e.line() - 1, e.column())
                };
                src.error(l, c, format!("params: {}", strip_position(&e.to_string())))
            }),
            None => serde_json::from_value(self.params.clone()).map_err(|e| {
                src.error_at_offset(self.params_offset, format!("params (after scan substitution): {e}"))
            }),
        }
    }

    /// Sets the scalar at dotted `path` in `params`. Missing leaf keys are
    /// inserted and left to the strict schema to accept or reject.
    pub fn set_param(&mut self, src: &ConfigSource, path: &str, value: Value) -> LabResult<()> {
        let bad = |msg: String| src.error_at_offset(self.params_offset, msg);
        let keys: Vec<&str> = path.split('.').collect();
        if keys.iter().any(|k| k.is_empty()) {
            return Err(bad(format!("invalid parameter path '{path}'")));
        }
        let mut cur = &mut self.params;
        for k in &keys[..keys.len() - 1] {
            cur = cur
                .get_mut(*k)
                .filter(|v| v.is_object())
                .ok_or_else(|| src.error_at_offset(self.params_offset, format!("'{path}' does not address a scalar in params")))?;
        }
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| bad(format!("'{path}' does not address a scalar in params")))?;
        let leaf = keys[keys.len() - 1];
        if let Some(old) = obj.get(leaf) {
            if old.is_object() || old.is_array() {
                return Err(bad(format!("'{path}' addresses a non-scalar value")));
            }
        }
        obj.insert(leaf.to_string(), value);
        self.params_span = None;
        Ok(())
    }

    /// The full config as JSON, for the manifest.
    pub fn echo(&self) -> Value {
        serde_json::json!({
            "model": self.model.name(),
            "params": self.params,
            "seed": self.seed,
            "replicas": self.replicas,
            "output_dir": self.output_dir,
        })
    }
}
