//! Training loop, classification metrics, learning curves and the model
//! comparison report.

mod compare;
mod history;
mod metrics;

pub use compare::{compare_models, ComparisonReport, ComparisonRow, RowStatus};
pub use history::{export_history, history_to_csv, history_to_json, render_curves, HistoryFormat};
pub use metrics::{
    cohens_kappa, evaluate, precision_recall_f1, Averaging, ConfusionMatrix, MetricsError, MetricsReport, Prf,
};

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureTensor;
use crate::models::{argmax, Model, ModelError};
use crate::nn::{Mode, NnError, Optimizer, SplitMix64, Tensor};
use crate::ravdess::{CachedExample, LabeledExample};

/// Examples per gradient work unit. Units run in parallel and are reduced
/// in order, so results do not depend on the thread count.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("{0} set is empty")]
    EmptySet(&'static str),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Anything with a feature tensor and a class label.
pub trait Labeled {
    fn features(&self) -> &FeatureTensor;
    fn label(&self) -> usize;
}

impl Labeled for (FeatureTensor, usize) {
    fn features(&self) -> &FeatureTensor {
        &self.0
    }
    fn label(&self) -> usize {
        self.1
    }
}

impl Labeled for CachedExample {
    fn features(&self) -> &FeatureTensor {
        &self.features
    }
    fn label(&self) -> usize {
        self.label
    }
}

impl Labeled for LabeledExample {
    fn features(&self) -> &FeatureTensor {
        &self.features
    }
    fn label(&self) -> usize {
        self.label
    }
}

impl<T: Labeled> Labeled for &T {
    fn features(&self) -> &FeatureTensor {
        (*self).features()
    }
    fn label(&self) -> usize {
        (*self).label()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            optimizer: Optimizer::default(),
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

struct Prepared {
    inputs: Vec<Tensor<f32>>,
    labels: Vec<usize>,
}

fn prepare<E: Labeled>(model: &Model, set: &[E], name: &'static str) -> Result<Prepared, TrainError> {
    if set.is_empty() {
        return Err(TrainError::EmptySet(name));
    }
    let classes = model.num_classes();
    let mut inputs = Vec::with_capacity(set.len());
    let mut labels = Vec::with_capacity(set.len());
    for ex in set {
        if ex.label() >= classes {
            return Err(TrainError::LabelOutOfRange {
                label: ex.label(),
                classes,
            });
        }
        inputs.push(model.input_tensor(ex.features())?);
        labels.push(ex.label());
    }
    Ok(Prepared { inputs, labels })
}

/// Mean Eval-mode loss and accuracy over a prepared set.
fn loss_and_accuracy(model: &Model, set: &Prepared) -> Result<(f64, f64), TrainError> {
    let per_example: Vec<(f32, usize)> = set
        .inputs
        .par_iter()
        .zip(&set.labels)
        .map(|(x, &label)| {
            let (loss, probs) = model.net.eval_loss(x, label)?;
            Ok((loss, argmax(&probs)))
        })
        .collect::<Result<_, NnError>>()?;
    let n = set.labels.len() as f64;
    let loss = per_example.iter().map(|(l, _)| *l as f64).sum::<f64>() / n;
    let correct = per_example
        .iter()
        .zip(&set.labels)
        .filter(|((_, p), l)| p == *l)
        .count();
    Ok((loss, correct as f64 / n))
}

/// Sum of per-example gradients over `positions`, plus the summed loss.
fn chunk_gradient(
    model: &Model,
    set: &Prepared,
    positions: &[(usize, usize)],
    seed: u64,
    epoch: usize,
) -> Result<(Vec<Tensor<f32>>, f64), NnError> {
    let mut grads = model.net.zero_grads();
    let mut loss_sum = 0.0;
    for &(pos, idx) in positions {
        let mut rng = SplitMix64::derive(seed, &[1, epoch as u64, pos as u64]);
        let (loss, _, _) = model.net.loss_and_grad(
            &set.inputs[idx],
            set.labels[idx],
            Mode::Train,
            &mut rng,
            &mut grads,
            false,
        )?;
        loss_sum += loss as f64;
    }
    Ok((grads, loss_sum))
}

/// Trains `model` in place and returns one record per epoch.
///
/// Each epoch shuffles the training order (seeded), takes mini-batch
/// optimizer steps, then scores both sets in Eval mode.
pub fn train<E: Labeled + Sync>(
    model: &mut Model,
    train_set: &[E],
    val_set: &[E],
    cfg: &TrainConfig,
) -> Result<Vec<EpochRecord>, TrainError> {
    train_with_progress(model, train_set, val_set, cfg, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with_progress<E: Labeled + Sync>(
    model: &mut Model,
    train_set: &[E],
    val_set: &[E],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<Vec<EpochRecord>, TrainError> {
    cfg.validate()?;
    let train_data = prepare(model, train_set, "training")?;
    let val_data = prepare(model, val_set, "validation")?;
    let n = train_data.labels.len();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut step: u64 = 0;

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        if cfg.shuffle {
            SplitMix64::derive(cfg.seed, &[0, epoch as u64]).shuffle(&mut order);
        }
        let positioned: Vec<(usize, usize)> = order.into_iter().enumerate().collect();
        for batch in positioned.chunks(cfg.batch_size) {
            let model_ref = &*model;
            let partials = batch
                .par_chunks(GRAD_CHUNK)
                .map(|chunk| chunk_gradient(model_ref, &train_data, chunk, cfg.seed, epoch))
                .collect::<Result<Vec<_>, NnError>>()?;
            let mut partials = partials.into_iter();
            let (mut total, _) = partials.next().expect("batches are non-empty");
            for (grads, _) in partials {
                for (t, g) in total.iter_mut().zip(&grads) {
                    t.add_assign(g);
                }
            }
            let scale = 1.0 / batch.len() as f32;
            for (p, mut g) in model.net.params_mut().into_iter().zip(total) {
                g.scale(scale);
                p.grad = g;
            }
            step += 1;
            cfg.optimizer.step(model.net.params_mut(), step);
        }

        let (train_loss, train_acc) = loss_and_accuracy(model, &train_data)?;
        let (val_loss, val_acc) = loss_and_accuracy(model, &val_data)?;
        let record = EpochRecord {
            epoch,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
        };
        on_epoch(&record);
        history.push(record);
    }
    Ok(history)
}

/// Generator used to initialize model weights for a run with `seed`.
pub fn init_rng(seed: u64) -> SplitMix64 {
    SplitMix64::derive(seed, &[2])
}

/// Eval-mode predictions for every example, in order.
pub fn predict_labels<E: Labeled + Sync>(model: &Model, set: &[E]) -> Result<Vec<usize>, TrainError> {
    set.par_iter()
        .map(|ex| Ok(argmax(&model.predict_proba(ex.features())?)))
        .collect()
}
