use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, std_dev};

/// Per-run values of one metric with their aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub dataset: String,
    pub model: String,
    pub gamma: Option<f64>,
    pub metric: String,
    pub runs: usize,
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
    /// Other per-run quantities, e.g. dimension counts or coverage.
    pub extra: BTreeMap<String, Vec<f64>>,
    pub config: serde_json::Value,
    pub notes: Vec<String>,
}

impl EvalReport {
    pub fn new(task: &str, metric: &str, values: Vec<f64>) -> Self {
        Self {
            task: task.to_owned(),
            dataset: String::new(),
            model: String::new(),
            gamma: None,
            metric: metric.to_owned(),
            runs: values.len(),
            mean: mean(&values),
            std: std_dev(&values),
            values,
            extra: BTreeMap::new(),
            config: serde_json::Value::Null,
            notes: Vec::new(),
        }
    }

    pub fn dataset(mut self, name: &str) -> Self {
        self.dataset = name.to_owned();
        self
    }

    pub fn model(mut self, name: &str, gamma: Option<f64>) -> Self {
        self.model = name.to_owned();
        self.gamma = gamma;
        self
    }

    pub fn config(mut self, cfg: &impl Serialize) -> Self {
        self.config = serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null);
        self
    }

    pub fn extra(mut self, key: &str, values: Vec<f64>) -> Self {
        self.extra.insert(key.to_owned(), values);
        self
    }

    pub fn note(&mut self, note: impl Into<String>) {
        let note = note.into();
        if !self.notes.contains(&note) {
            self.notes.push(note);
        }
    }

    /// Checks that the stored aggregate matches the per-run values.
    pub fn is_consistent(&self) -> bool {
        let same = |a: f64, b: f64| (a.is_nan() && b.is_nan()) || (a - b).abs() <= 1e-12 * a.abs().max(1.0);
        self.runs == self.values.len() && same(self.mean, mean(&self.values)) && same(self.std, std_dev(&self.values))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Format(format!("bad report: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "{}", self.to_json()).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        let gamma = self.gamma.map(|g| format!(" gamma={g}")).unwrap_or_default();
        format!(
            "{} {} {}{}: {} = {:.4} ± {:.4} over {} runs",
            self.task, self.dataset, self.model, gamma, self.metric, self.mean, self.std, self.runs
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_and_round_trip() {
        let mut r = EvalReport::new("degree", "r2", vec![0.5, 0.7, 0.9])
            .dataset("toy")
            .model("sinr-nr", Some(1.0))
            .extra("dims", vec![3.0, 3.0, 4.0]);
        r.note("ridge fallback used");
        r.note("ridge fallback used");
        assert_eq!(r.notes.len(), 1);
        assert!((r.mean - 0.7).abs() < 1e-12);
        assert!((r.std - 0.2).abs() < 1e-12);
        assert!(r.is_consistent());
        let back = EvalReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert!(r.summary().contains("r2 = 0.7000"));
    }
}
