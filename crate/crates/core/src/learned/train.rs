//! Seeded mini-batch training with a plateau learning-rate schedule.
//!
//! Batches are produced by a generator thread running ahead of the
//! optimizer through a bounded channel; within a batch, examples are built
//! in parallel but kept in index order, so the whole run is reproducible
//! from the seed alone.

use super::inputs::LabeledExample;
use super::nets::{draw_max, forward, DropoutPlan, Net};
use super::LearnedError;
use crate::neuralnet::{adam_step, AdamConfig, Grads, Tensor};
use crate::seeding::{mix2, mix3};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::sync::mpsc::sync_channel;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub iterations_per_epoch: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub dropout_rate: f64,
    pub lr_decay_factor: f64,
    pub lr_patience_epochs: usize,
    pub lr_min: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Defaults sized for a laptop-scale run.
    pub fn desk(epochs: usize, seed: u64) -> Self {
        TrainConfig {
            epochs,
            iterations_per_epoch: 64,
            batch_size: 32,
            adam: AdamConfig::default(),
            dropout_rate: 0.1,
            lr_decay_factor: 0.9,
            lr_patience_epochs: 10,
            lr_min: 1e-5,
            seed,
        }
    }

    fn validate(&self) -> Result<(), LearnedError> {
        let positive = self.epochs > 0
            && self.iterations_per_epoch > 0
            && self.batch_size > 0
            && self.lr_patience_epochs > 0
            && self.lr_decay_factor > 0.0
            && self.lr_min > 0.0
            && self.adam.learning_rate > 0.0;
        if !positive {
            return Err(LearnedError::BadConfig("all fields must be positive".into()));
        }
        if self.lr_min > self.adam.learning_rate {
            return Err(LearnedError::BadConfig(
                "the learning-rate floor exceeds the starting rate".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(LearnedError::BadConfig("dropout rate must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// One epoch of the training record.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_train_loss: f64,
    pub validation_loss: f64,
    pub validation_accuracy: f64,
    pub learning_rate: f64,
}

/// The trained network (final state), the best-validation snapshot, and
/// the per-epoch record.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochStats>,
    pub final_params: BTreeMap<String, Tensor>,
    pub best_params: BTreeMap<String, Tensor>,
    pub best_epoch: usize,
    pub best_validation_loss: f64,
}

fn mean_validation(
    net: &Net,
    validation: &[LabeledExample],
    seed: u64,
    epoch: usize,
) -> Result<(f64, f64), LearnedError> {
    assert!(!validation.is_empty(), "validation set must be non-empty");
    let scored: Vec<(f64, bool)> = validation
        .par_iter()
        .enumerate()
        .map(|(i, ex)| {
            let posterior = forward(net, &ex.inputs)?;
            let loss = -posterior.probs()[ex.target].max(1e-300).ln();
            let pick = draw_max(&posterior, mix3(seed, epoch as u64, i as u64));
            Ok((loss, pick == ex.target))
        })
        .collect::<Result<_, LearnedError>>()?;
    let loss = scored.iter().map(|(l, _)| l).sum::<f64>() / scored.len() as f64;
    let correct = scored.iter().filter(|(_, c)| *c).count();
    Ok((loss, correct as f64 / scored.len() as f64))
}

/// Train `net` in place. `gen` maps a global example index to a labeled
/// example; indices run over iterations x batch slots so a fixed seed
/// replays the identical stream. Batch generation runs one batch ahead of
/// the optimizer on a worker thread.
pub fn train(
    net: &mut Net,
    gen: impl Fn(u64) -> LabeledExample + Send + Sync,
    validation: &[LabeledExample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, LearnedError> {
    cfg.validate()?;
    if validation.is_empty() {
        return Err(LearnedError::BadConfig("validation set must be non-empty".into()));
    }

    let total_iterations = (cfg.epochs * cfg.iterations_per_epoch) as u64;
    let batch = cfg.batch_size as u64;

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut lr = cfg.adam.learning_rate;
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_params = net.params().values_snapshot();
    let mut stale_epochs = 0usize;

    std::thread::scope(|scope| -> Result<(), LearnedError> {
        let (tx, rx) = sync_channel::<(u64, Vec<LabeledExample>)>(2);
        let gen = &gen;
        scope.spawn(move || {
            for iter in 0..total_iterations {
                let examples: Vec<LabeledExample> = (0..batch)
                    .into_par_iter()
                    .map(|slot| gen(iter * batch + slot))
                    .collect();
                if tx.send((iter, examples)).is_err() {
                    return;
                }
            }
        });

        for epoch in 0..cfg.epochs {
            let mut epoch_loss = 0.0;
            for _ in 0..cfg.iterations_per_epoch {
                let (iter, examples) = rx.recv().expect("generator thread alive");
                let batch_seed = mix2(cfg.seed, iter);

                let results: Vec<(f64, Grads)> = examples
                    .par_iter()
                    .enumerate()
                    .map(|(slot, ex)| {
                        let plan =
                            DropoutPlan::train(cfg.dropout_rate, mix2(batch_seed, slot as u64));
                        net.loss_and_grads_with(net.params(), &ex.inputs, ex.target, &plan)
                    })
                    .collect::<Result<_, LearnedError>>()?;

                let scale = 1.0 / results.len() as f64;
                let mut mean_loss = 0.0;
                let mut grads = Grads::new();
                for (loss, g) in &results {
                    mean_loss += loss * scale;
                    grads.merge(g);
                }
                grads.scale(scale);

                if !mean_loss.is_finite() {
                    return Err(LearnedError::DivergedLoss { iteration: iter, batch_seed });
                }
                let step_cfg = AdamConfig { learning_rate: lr, ..cfg.adam };
                adam_step(net.params_mut(), &grads, &step_cfg)?;
                epoch_loss += mean_loss;
            }

            let (val_loss, val_acc) = mean_validation(net, validation, cfg.seed, epoch)?;
            history.push(EpochStats {
                epoch,
                mean_train_loss: epoch_loss / cfg.iterations_per_epoch as f64,
                validation_loss: val_loss,
                validation_accuracy: val_acc,
                learning_rate: lr,
            });

            if val_loss < best_loss {
                best_loss = val_loss;
                best_epoch = epoch;
                best_params = net.params().values_snapshot();
                stale_epochs = 0;
            } else {
                stale_epochs += 1;
                if stale_epochs >= cfg.lr_patience_epochs {
                    lr = (lr * cfg.lr_decay_factor).max(cfg.lr_min);
                    stale_epochs = 0;
                }
            }
        }
        Ok(())
    })?;

    Ok(TrainOutcome {
        history,
        final_params: net.params().values_snapshot(),
        best_params,
        best_epoch,
        best_validation_loss: best_loss,
    })
}
