use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// Uniformly sampled path of real vectors, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    dt: f64,
    dim: usize,
    data: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl TimeSeries {
    pub fn new(dt: f64, dim: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid("dt", "must be positive and finite"));
        }
        if dim == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        Ok(Self {
            dt,
            dim,
            data: Vec::new(),
            labels: None,
        })
    }

    pub fn with_capacity(dt: f64, dim: usize, rows: usize) -> Result<Self> {
        let mut s = Self::new(dt, dim)?;
        s.data.reserve(rows * dim);
        Ok(s)
    }

    pub fn from_scalar(dt: f64, values: Vec<f64>) -> Result<Self> {
        let mut s = Self::new(dt, 1)?;
        s.data = values;
        Ok(s)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.dim {
            return Err(invalid("labels", "one label per component required"));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Appends one row. Panics if `row.len() != dim`.
    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.dim, "row dimension mismatch");
        self.data.extend_from_slice(row);
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn component(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        assert!(k < self.dim);
        self.data.iter().skip(k).step_by(self.dim).copied()
    }

    pub fn component_vec(&self, k: usize) -> Vec<f64> {
        self.component(k).collect()
    }

    /// Time stamp of row `i`.
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Drops the first `rows` rows.
    pub fn skip_rows(&self, rows: usize) -> TimeSeries {
        let start = (rows * self.dim).min(self.data.len());
        TimeSeries {
            dt: self.dt,
            dim: self.dim,
            data: self.data[start..].to_vec(),
            labels: self.labels.clone(),
        }
    }
}
