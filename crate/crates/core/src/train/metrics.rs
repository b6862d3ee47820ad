use super::config::TrainConfig;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub best_val_accuracy: f64,
    pub test_accuracy_at_best_val: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub final_train_loss: f64,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub mean: f64,
    pub ci95: f64,
}

/// Mean and `1.96 * std / sqrt(n)` with the n-1 standard deviation.
pub fn aggregate_runs(values: &[f64]) -> Result<Aggregate> {
    let n = values.len();
    if n < 2 {
        return Err(Error::param(format!("aggregate needs at least 2 runs, got {n}")));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    // Shifted by the first value so identical runs give exactly zero.
    let d: Vec<f64> = values.iter().map(|v| v - values[0]).collect();
    let d_mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - d_mean) * (v - d_mean)).sum::<f64>() / (n - 1) as f64;
    Ok(Aggregate { runs: n, mean, ci95: 1.96 * var.sqrt() / (n as f64).sqrt() })
}

/// The JSON document written by the command-line trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsDocument {
    pub artifact_version: String,
    pub config: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    pub runs: Vec<RunMetrics>,
    /// Present exactly when there are at least two runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<Aggregate>,
    pub wall_clock_seconds: f64,
}

impl MetricsDocument {
    pub fn new(config: TrainConfig, dataset: Option<String>, runs: Vec<RunMetrics>, wall_clock_seconds: f64) -> Self {
        let tests: Vec<f64> = runs.iter().map(|r| r.test_accuracy_at_best_val).collect();
        MetricsDocument {
            artifact_version: ARTIFACT_VERSION.to_string(),
            config,
            dataset,
            aggregate: aggregate_runs(&tests).ok(),
            runs,
            wall_clock_seconds,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_examples() {
        let a = aggregate_runs(&[0.7, 0.7, 0.7]).unwrap();
        assert_eq!(a.ci95, 0.0);
        let a = aggregate_runs(&[0.8, 1.0]).unwrap();
        assert!((a.mean - 0.9).abs() < 1e-15);
        let std = (0.02f64).sqrt();
        assert!((a.ci95 - 1.96 * std / 2f64.sqrt()).abs() < 1e-15);
        assert!((a.ci95 - 0.196).abs() < 1e-12);
        assert!(aggregate_runs(&[0.5]).is_err());
    }
}
