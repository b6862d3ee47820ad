use super::config::{TrainConfig, GROUPS};
use super::metrics::{EpochRecord, RunMetrics};
use super::model::Model;
use super::optim::{adam_step, AdamState, ParamGroup};
use super::{accuracy, split_nodes, MaskKind, SplitMasks};
use crate::autodiff::{log_softmax, masked_nll, Tape};
use crate::data::{Dataset, FilterFixture};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::{build_graph_matrix, csr_from_edges, GraphMatrixKind, SparseMatrix};
use crate::rng::{Purpose, Stream};
use serde::{Deserialize, Serialize};

/// Everything a classification run needs, derived from a dataset and config.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub x: DenseMatrix,
    pub s: SparseMatrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub split: SplitMasks,
}

/// Builds `S`, the feature matrix, and the split for `config.seed`.
pub fn prepare(ds: &Dataset, config: &TrainConfig) -> Result<TrainingData> {
    let a = csr_from_edges(&ds.graph(), false)?;
    let s = build_graph_matrix(&a, config.graph_matrix)?;
    let mut x = ds.features_matrix();
    if config.row_normalize {
        for i in 0..x.rows() {
            let row = x.row_mut(i);
            let total: f64 = row.iter().map(|v| v.abs()).sum();
            if total > 0.0 {
                row.iter_mut().for_each(|v| *v /= total);
            }
        }
    }
    Ok(TrainingData {
        x,
        s,
        labels: ds.labels.iter().map(|&l| l as usize).collect(),
        num_classes: ds.num_classes,
        split: split_nodes(ds.n, config.seed)?,
    })
}

fn optimizer_groups(model: &Model, config: &TrainConfig) -> (Vec<ParamGroup>, Vec<usize>) {
    let groups = GROUPS
        .iter()
        .map(|&name| ParamGroup {
            name: name.to_string(),
            learning_rate: config.learning_rate.get(name),
            weight_decay: config.weight_decay.get(name),
        })
        .collect();
    let group_of =
        model.params.params.iter().map(|p| GROUPS.iter().position(|&g| g == p.group).expect("known group")).collect();
    (groups, group_of)
}

/// Metrics plus the model holding the best-validation parameters.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub metrics: RunMetrics,
    pub model: Model,
}

/// Full-graph training with early stopping on validation accuracy (lower
/// validation loss breaks ties).
pub fn train_run(data: &TrainingData, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let train_idx = data.split.indices(MaskKind::Train);
    let val_idx = data.split.indices(MaskKind::Val);
    let test_idx = data.split.indices(MaskKind::Test);
    if train_idx.is_empty() {
        return Err(Error::param("empty train mask"));
    }
    if val_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::param("empty validation or test mask"));
    }
    let mut init_rng = Stream::substream(config.seed, Purpose::Init);
    let mut model = Model::assemble(config, data.x.cols(), data.num_classes, &mut init_rng)?;
    let (groups, group_of) = optimizer_groups(&model, config);
    let mut state = AdamState::new();
    let mut drop_rng = Stream::substream(config.seed, Purpose::Dropout);
    let mut values = model.params.values();

    let mut best: Option<(f64, f64, usize, f64)> = None; // (val acc, val loss, epoch, test acc)
    let mut best_values = values.clone();
    let mut since_best = 0usize;
    let mut history = Vec::new();
    let mut final_train_loss = f64::NAN;

    for epoch in 1..=config.epochs {
        let mut tape = Tape::training(config.dropout, drop_rng)?;
        let logits = model.record_with(&mut tape, &values, &data.x, &data.s)?;
        let logp = tape.log_softmax(logits);
        let loss = tape.masked_nll(logp, &data.labels, &train_idx)?;
        let train_loss = tape.get(loss)[(0, 0)];
        let grads = tape.backward(loss)?;
        drop_rng = tape.into_rng().expect("training tape");
        adam_step(&mut values, &grads, &groups, &group_of, &mut state)?;
        final_train_loss = train_loss;

        let logits = model.predict_with(&values, &data.x, &data.s)?;
        let logp = log_softmax(&logits);
        let val_loss = masked_nll(&logp, &data.labels, &val_idx)?;
        let val_accuracy = accuracy(&logits, &data.labels, &val_idx)?;
        let test_accuracy = accuracy(&logits, &data.labels, &test_idx)?;
        history.push(EpochRecord { epoch, train_loss, val_loss, val_accuracy, test_accuracy });

        let improved = match best {
            None => true,
            Some((acc, vloss, _, _)) => val_accuracy > acc || (val_accuracy == acc && val_loss < vloss),
        };
        if improved {
            best = Some((val_accuracy, val_loss, epoch, test_accuracy));
            best_values.clone_from(&values);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }

    let (best_val_accuracy, _, best_epoch, test_accuracy_at_best_val) = best.expect("at least one epoch");
    model.params.set_values(best_values)?;
    Ok(TrainOutcome {
        metrics: RunMetrics {
            seed: config.seed,
            best_val_accuracy,
            test_accuracy_at_best_val,
            best_epoch,
            epochs_run: history.len(),
            final_train_loss,
            history,
        },
        model,
    })
}

/// [`prepare`] followed by [`train_run`], keeping only the metrics.
pub fn train_loop(ds: &Dataset, config: &TrainConfig) -> Result<RunMetrics> {
    let data = prepare(ds, config)?;
    Ok(train_run(&data, config)?.metrics)
}

/// Node regression: fit `targets` on `train` rows, score on `heldout` rows.
#[derive(Debug, Clone)]
pub struct RegressionTask {
    pub x: DenseMatrix,
    pub s: SparseMatrix,
    pub targets: DenseMatrix,
    pub train: Vec<usize>,
    pub heldout: Vec<usize>,
}

impl RegressionTask {
    /// Fits on the train split of `split_nodes(n, seed)` and holds out the test split.
    pub fn from_fixture(fixture: &FilterFixture, kind: GraphMatrixKind, seed: u64) -> Result<Self> {
        let s = build_graph_matrix(&csr_from_edges(&fixture.graph, false)?, kind)?;
        let split = split_nodes(fixture.features.rows(), seed)?;
        Ok(RegressionTask {
            x: fixture.features.clone(),
            s,
            targets: fixture.targets.clone(),
            train: split.indices(MaskKind::Train),
            heldout: split.indices(MaskKind::Test),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub seed: u64,
    pub steps: usize,
    pub final_train_loss: f64,
    /// `||Y_hat - Y||_F / ||Y||_F` over held-out rows.
    pub heldout_relative_error: f64,
    /// `(step, train loss, held-out relative error)` every `log_every` steps.
    pub history: Vec<(usize, f64, f64)>,
}

fn relative_error(pred: &DenseMatrix, target: &DenseMatrix, rows: &[usize]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for &r in rows {
        for (p, t) in pred.row(r).iter().zip(target.row(r)) {
            num += (p - t) * (p - t);
            den += t * t;
        }
    }
    (num / den).sqrt()
}

/// Trains for exactly `steps` Adam steps on mean squared error.
pub fn fit_regression(
    task: &RegressionTask,
    config: &TrainConfig,
    steps: usize,
    log_every: usize,
) -> Result<(RegressionMetrics, Model)> {
    config.validate()?;
    if task.train.is_empty() || task.heldout.is_empty() {
        return Err(Error::param("regression needs nonempty train and held-out rows"));
    }
    let mut init_rng = Stream::substream(config.seed, Purpose::Init);
    let mut model = Model::assemble(config, task.x.cols(), task.targets.cols(), &mut init_rng)?;
    let (groups, group_of) = optimizer_groups(&model, config);
    let mut state = AdamState::new();
    let mut drop_rng = Stream::substream(config.seed, Purpose::Dropout);
    let mut values = model.params.values();
    let mut history = Vec::new();
    let mut final_train_loss = f64::NAN;
    for step in 1..=steps {
        let mut tape = Tape::training(config.dropout, drop_rng)?;
        let pred = model.record_with(&mut tape, &values, &task.x, &task.s)?;
        let loss = tape.masked_mse(pred, &task.targets, &task.train)?;
        final_train_loss = tape.get(loss)[(0, 0)];
        let grads = tape.backward(loss)?;
        drop_rng = tape.into_rng().expect("training tape");
        adam_step(&mut values, &grads, &groups, &group_of, &mut state)?;
        if log_every > 0 && (step % log_every == 0 || step == steps) {
            let pred = model.predict_with(&values, &task.x, &task.s)?;
            history.push((step, final_train_loss, relative_error(&pred, &task.targets, &task.heldout)));
        }
    }
    let pred = model.predict_with(&values, &task.x, &task.s)?;
    let heldout_relative_error = relative_error(&pred, &task.targets, &task.heldout);
    model.params.set_values(values)?;
    Ok((RegressionMetrics { seed: config.seed, steps, final_train_loss, heldout_relative_error, history }, model))
}
