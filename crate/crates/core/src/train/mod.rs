//! Node-classification training: model assembly, Adam, splits, early
//! stopping, metrics.

mod config;
mod fit;
mod metrics;
mod model;
mod optim;

pub use config::{Architecture, BiasInit, GroupValues, ModelVariant, Ranks, TrainConfig, GROUPS};
pub use fit::{
    fit_regression, prepare, train_loop, train_run, RegressionMetrics, RegressionTask, TrainOutcome, TrainingData,
};
pub use metrics::{aggregate_runs, Aggregate, EpochRecord, MetricsDocument, RunMetrics, ARTIFACT_VERSION};
pub use model::{init_params, Model, Param, ParamStore};
pub use optim::{adam_step, AdamState, ParamGroup};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::ops::{check_rate, kernels};
use crate::rng::Stream;
use serde::{Deserialize, Serialize};

/// Disjoint train/validation/test node masks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMasks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskKind {
    Train,
    Val,
    Test,
}

impl MaskKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "train" => Ok(MaskKind::Train),
            "val" => Ok(MaskKind::Val),
            "test" => Ok(MaskKind::Test),
            other => Err(Error::param(format!("unknown mask '{other}'"))),
        }
    }
}

impl SplitMasks {
    pub fn mask(&self, kind: MaskKind) -> &[bool] {
        match kind {
            MaskKind::Train => &self.train,
            MaskKind::Val => &self.val,
            MaskKind::Test => &self.test,
        }
    }

    /// Node indices in `kind`, ascending.
    pub fn indices(&self, kind: MaskKind) -> Vec<usize> {
        self.mask(kind).iter().enumerate().filter_map(|(i, &m)| m.then_some(i)).collect()
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        let count = |m: &[bool]| m.iter().filter(|&&b| b).count();
        (count(&self.train), count(&self.val), count(&self.test))
    }
}

/// 60/20/20 split from a Fisher-Yates permutation of `0..n` drawn from a
/// stream seeded with `seed`. Train takes the first `round(0.6 n)` entries,
/// validation the next `round(0.2 n)`, test the rest.
pub fn split_nodes(n: usize, seed: u64) -> Result<SplitMasks> {
    if n < 5 {
        return Err(Error::param(format!("cannot split {n} nodes; need at least 5")));
    }
    let perm = Stream::new(seed).permutation(n);
    let n_train = (0.6 * n as f64).round() as usize;
    let n_val = (0.2 * n as f64).round() as usize;
    let mut masks = SplitMasks { train: vec![false; n], val: vec![false; n], test: vec![false; n] };
    for (pos, &node) in perm.iter().enumerate() {
        if pos < n_train {
            masks.train[node] = true;
        } else if pos < n_train + n_val {
            masks.val[node] = true;
        } else {
            masks.test[node] = true;
        }
    }
    Ok(masks)
}

/// Fraction of `rows` whose argmax (lowest index on ties) equals the label.
pub fn accuracy(logits: &DenseMatrix, labels: &[usize], rows: &[usize]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::param("accuracy over an empty mask"));
    }
    let mut correct = 0usize;
    for &r in rows {
        let row = logits.row(r);
        let mut best = 0;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        if best == labels[r] {
            correct += 1;
        }
    }
    Ok(correct as f64 / rows.len() as f64)
}

/// Inverted dropout; identity outside training.
pub fn dropout_apply(mat: &DenseMatrix, rate: f64, rng: &mut Stream, training: bool) -> Result<DenseMatrix> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(mat.clone());
    }
    let mask = kernels::dropout_mask(mat.as_slice().len(), rate, rng);
    let data = mat.as_slice().iter().zip(&mask).map(|(v, m)| v * m).collect();
    DenseMatrix::from_vec(mat.rows(), mat.cols(), data)
}
