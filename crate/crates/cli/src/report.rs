use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    pub t_final: f64,
    pub valid_acc: f64,
    pub test_acc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Results {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valid_acc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_acc: Option<f64>,
    pub per_seed: Vec<SeedResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<Failure>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Results {
    /// Fills `mean` (and `std` from two seeds on) of the per-seed test
    /// accuracies. The standard deviation is the sample one.
    pub fn summarize_seeds(&mut self) {
        let acc: Vec<f64> = self.per_seed.iter().map(|s| s.test_acc).collect();
        if acc.is_empty() {
            return;
        }
        let n = acc.len() as f64;
        let mean = acc.iter().sum::<f64>() / n;
        self.mean = Some(mean);
        if acc.len() >= 2 {
            let var = acc.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1.0);
            self.std = Some(var.sqrt());
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub dataset: String,
    pub config: Value,
    pub results: Results,
    pub wall_seconds: f64,
}

impl RunReport {
    pub fn emit(&self, out: Option<&Path>) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        match out {
            Some(path) => std::fs::write(path, text + "\n")?,
            None => println!("{text}"),
        }
        Ok(())
    }
}
