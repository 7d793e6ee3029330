use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::scalar;
use super::model::{ModelExample, MultisensoryModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub epochs: usize,
    pub adapter_rank: usize,
    pub seed: u64,
    /// Stops early after this many optimizer steps.
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { batch_size: 6, lr: 5e-5, lr_decay: 0.98, epochs: 10, adapter_rank: 8, seed: 0, max_steps: None }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 || self.adapter_rank == 0 {
            return Err(Error::invalid("batch_size, epochs and adapter_rank must be positive"));
        }
        if !(self.lr > 0.0) || !(self.lr_decay > 0.0) {
            return Err(Error::invalid("lr and lr_decay must be positive"));
        }
        Ok(())
    }
}

/// Learning rate during epoch `k` (counting from 0).
pub fn lr_at_epoch(config: &TrainConfig, k: usize) -> f64 {
    config.lr * config.lr_decay.powi(k as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub steps: Vec<StepLog>,
    pub epochs: Vec<EpochLog>,
}

fn mean_loss(model: &MultisensoryModel, examples: &[ModelExample]) -> Result<f64> {
    let mut total = 0.0;
    for ex in examples {
        total += scalar(&model.example_loss(ex)?.detach())?;
    }
    Ok(total / examples.len() as f64)
}

/// Adam over the trainable parameters (adapters, Q-Formers, projections),
/// mini-batches of `batch_size` examples, learning rate decayed per epoch.
pub fn train(
    model: &mut MultisensoryModel,
    train_set: &[ModelExample],
    valid_set: &[ModelExample],
    config: &TrainConfig,
    mut on_step: impl FnMut(&StepLog),
) -> Result<TrainReport> {
    config.validate()?;
    if model.config.lora.rank != config.adapter_rank {
        return Err(Error::invalid(format!(
            "model adapters have rank {}, training config asks for {}",
            model.config.lora.rank, config.adapter_rank
        )));
    }
    if train_set.is_empty() {
        return Err(Error::invalid("no training examples"));
    }
    let vars = model.store.trainable().into_iter().map(|(_, v)| v).collect();
    let params = ParamsAdamW { lr: config.lr, weight_decay: 0.0, ..Default::default() };
    let mut opt = AdamW::new(vars, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut report = TrainReport::default();
    let mut last_finite = None;
    'epochs: for epoch in 0..config.epochs {
        let lr = lr_at_epoch(config, epoch);
        opt.set_learning_rate(lr);
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        let mut epoch_batches = 0;
        for batch in order.chunks(config.batch_size) {
            let step = report.steps.len();
            let losses = batch.iter().map(|&i| model.example_loss(&train_set[i])).collect::<Result<Vec<_>>>()?;
            let loss = (candle_core::Tensor::stack(&losses, 0)?.sum_all()? / batch.len() as f64)?;
            let value = scalar(&loss)?;
            if !value.is_finite() {
                return Err(Error::Diverged {
                    step,
                    message: format!(
                        "loss {value} in epoch {epoch} at lr {lr:e}; last finite loss {last_finite:?}; batch examples {batch:?}"
                    ),
                });
            }
            last_finite = Some(value);
            opt.backward_step(&loss)?;
            let log = StepLog { step, epoch, loss: value, lr };
            tracing::debug!(step, epoch, loss = value, lr, "train step");
            on_step(&log);
            report.steps.push(log);
            epoch_total += value;
            epoch_batches += 1;
            if config.max_steps.is_some_and(|m| report.steps.len() >= m) {
                report.epochs.push(epoch_log(model, valid_set, epoch, epoch_total / epoch_batches as f64, lr)?);
                break 'epochs;
            }
        }
        report.epochs.push(epoch_log(model, valid_set, epoch, epoch_total / epoch_batches as f64, lr)?);
    }
    Ok(report)
}

fn epoch_log(model: &MultisensoryModel, valid: &[ModelExample], epoch: usize, train_loss: f64, lr: f64) -> Result<EpochLog> {
    let valid_loss = if valid.is_empty() { None } else { Some(mean_loss(model, valid)?) };
    tracing::info!(epoch, train_loss, ?valid_loss, lr, "epoch finished");
    Ok(EpochLog { epoch, train_loss, valid_loss, lr })
}
