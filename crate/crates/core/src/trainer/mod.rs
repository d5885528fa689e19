//! Batch-size sweeps of a small MLP under each loss.
//!
//! One run is single-threaded and fully determined by its seed: the seed
//! drives weight initialization and the per-epoch shuffles. A sweep runs its
//! `(loss, batch, seed)` cells in parallel and returns them in grid order.

mod data;
mod mlp;
mod report;

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::argmax_rows;

pub use data::{
    load_fashion_mnist, load_idx, make_synthetic, parse_idx_images, parse_idx_labels, Dataset, IDX_CLASSES,
    IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
};
pub use mlp::{loss_layer, ForwardCache, Gradients, LossKind, MlpModel};
pub use report::{format_summary, read_records_csv, summarize, write_records_csv, RecordRow, SummaryRow, CSV_HEADER};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub batch_size: usize,
    pub seed: u64,
    pub tau: f64,
    pub lr: f64,
    pub epochs: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub dataset: String,
    pub loss: LossKind,
    pub batch_size: usize,
    pub seed: u64,
    pub tau: f64,
    pub lr: f64,
    pub epochs: usize,
    /// Best test accuracy over the untrained model and every epoch.
    pub best_test_accuracy: f64,
    /// Mean minibatch loss over the last epoch (NaN if the run diverged).
    pub final_train_loss: f64,
    /// Mean minibatch loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub diverged: bool,
    /// Loss reduction over the batch; always `"mean"`.
    pub reduction: &'static str,
}

pub fn accuracy(model: &MlpModel, dataset: &Dataset, idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let (x, labels) = dataset.rows(idx);
    let pred = argmax_rows(model.logits(x.view()).view());
    pred.iter().zip(&labels).filter(|(p, y)| p == y).count() as f64 / idx.len() as f64
}

/// Mean loss over minibatches of `order`, with an SGD step per batch when
/// `update` is set. Returns NaN as soon as anything turns non-finite.
fn epoch_pass(
    model: &mut MlpModel,
    dataset: &Dataset,
    order: &[usize],
    cfg: &TrainConfig,
    update: bool,
) -> Result<f64> {
    let mut total = 0.0;
    let mut batches = 0usize;
    for chunk in order.chunks(cfg.batch_size) {
        let (x, labels) = dataset.rows(chunk);
        let cache = model.forward(x.view());
        if cache.logits.iter().any(|v| !v.is_finite()) {
            return Ok(f64::NAN);
        }
        let (value, dlogits) = loss_layer(cfg.loss, cache.logits.view(), &labels, cfg.tau)?;
        if !value.is_finite() {
            return Ok(f64::NAN);
        }
        if update {
            let grads = model.backward(x.view(), &cache, &dlogits);
            model.sgd_step(&grads, cfg.lr);
            if !model.is_finite() {
                return Ok(f64::NAN);
            }
        }
        total += value;
        batches += 1;
    }
    Ok(total / batches.max(1) as f64)
}

pub fn train_one(dataset: &Dataset, cfg: &TrainConfig) -> Result<RunRecord> {
    if cfg.batch_size == 0 || cfg.batch_size > dataset.train.len() {
        return Err(Error::arg(format!(
            "batch size {} must be in 1..={}",
            cfg.batch_size,
            dataset.train.len()
        )));
    }
    if !(cfg.lr.is_finite() && cfg.lr > 0.0) || !(cfg.tau.is_finite() && cfg.tau > 0.0) {
        return Err(Error::arg("learning rate and temperature must be positive"));
    }
    if cfg.hidden == 0 {
        return Err(Error::arg("hidden width must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = MlpModel::init(dataset.dims(), cfg.hidden, dataset.num_classes, &mut rng);

    let mut best = accuracy(&model, dataset, &dataset.test);
    let mut order = dataset.train.clone();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut diverged = false;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let loss = epoch_pass(&mut model, dataset, &order, cfg, true)?;
        epoch_losses.push(loss);
        if !loss.is_finite() {
            diverged = true;
            break;
        }
        best = best.max(accuracy(&model, dataset, &dataset.test));
    }
    let final_train_loss = match epoch_losses.last() {
        Some(&l) => l,
        None => epoch_pass(&mut model, dataset, &dataset.train, cfg, false)?,
    };

    Ok(RunRecord {
        dataset: dataset.name.clone(),
        loss: cfg.loss,
        batch_size: cfg.batch_size,
        seed: cfg.seed,
        tau: cfg.tau,
        lr: cfg.lr,
        epochs: cfg.epochs,
        best_test_accuracy: best,
        final_train_loss: if diverged { f64::NAN } else { final_train_loss },
        epoch_losses,
        diverged,
        reduction: "mean",
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub samples: usize,
    pub dims: usize,
    pub separation: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    Synthetic,
    FashionMnist,
}

/// Sweep configuration, read from JSON by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub dataset: DatasetKind,
    #[serde(default)]
    pub synthetic: Option<SyntheticConfig>,
    pub losses: Vec<LossKind>,
    pub batches: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    pub lr: f64,
    pub epochs: usize,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    /// Fashion-MNIST subsample sizes.
    #[serde(default)]
    pub train_size: Option<usize>,
    #[serde(default)]
    pub test_size: Option<usize>,
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    #[serde(default)]
    pub out_csv: Option<PathBuf>,
}

fn default_tau() -> f64 {
    1.0
}

fn default_hidden() -> usize {
    64
}

impl SweepConfig {
    pub fn load_dataset(&self) -> Result<Dataset> {
        match self.dataset {
            DatasetKind::Synthetic => {
                let s = self
                    .synthetic
                    .as_ref()
                    .ok_or_else(|| Error::arg("dataset 'synthetic' needs a 'synthetic' section"))?;
                make_synthetic(s.classes, s.samples, s.dims, s.separation, s.seed)
            }
            DatasetKind::FashionMnist => {
                let dir = self
                    .data_dir
                    .as_ref()
                    .ok_or_else(|| Error::arg("dataset 'fashion-mnist' needs 'data_dir'"))?;
                load_fashion_mnist(dir, self.train_size.unwrap_or(6000), self.test_size.unwrap_or(1000))
            }
        }
    }

    pub fn cells(&self) -> Vec<TrainConfig> {
        let mut out = Vec::new();
        for &loss in &self.losses {
            for &batch_size in &self.batches {
                for &seed in &self.seeds {
                    out.push(TrainConfig {
                        loss,
                        batch_size,
                        seed,
                        tau: self.tau,
                        lr: self.lr,
                        epochs: self.epochs,
                        hidden: self.hidden,
                    });
                }
            }
        }
        out
    }
}

/// Runs every `(loss, batch, seed)` cell. Output order is the grid order of
/// [`SweepConfig::cells`] regardless of scheduling.
pub fn sweep(config: &SweepConfig, dataset: &Dataset) -> Result<Vec<RunRecord>> {
    if config.losses.is_empty() || config.batches.is_empty() || config.seeds.is_empty() {
        return Err(Error::arg("sweep needs at least one loss, batch size and seed"));
    }
    config
        .cells()
        .par_iter()
        .map(|cell| train_one(dataset, cell))
        .collect()
}
