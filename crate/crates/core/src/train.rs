//! Mini-batch Adam training with early stopping on validation loss.

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::key::mix_seed;
use crate::dataset::{DatasetContainer, Splits, WaveformKey, VECTOR_LEN};
use crate::error::{Error, Result};
use crate::model::{image_batch, mtl_loss, MtlModel, TaskWeights};
use crate::nn::{AdamState, Checkpoint, Mode, Tensor};
use crate::scalar::Scalar;

fn d_epochs() -> usize {
    30
}
fn d_patience() -> usize {
    5
}
fn d_lr() -> f64 {
    1e-3
}
fn d_batch() -> usize {
    128
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_patience")]
    pub patience: usize,
    #[serde(default = "d_lr")]
    pub lr: f64,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub weights: TaskWeights,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: d_epochs(),
            patience: d_patience(),
            lr: d_lr(),
            batch_size: d_batch(),
            weights: TaskWeights::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be at least 2 (batch norm)".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }
}

/// Losses and accuracies over one pass of a split.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub total: f64,
    pub l_m: f64,
    pub l_s: f64,
    pub acc_m: f64,
    pub acc_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train: Metrics,
    pub val: Metrics,
    /// Lowest validation total loss seen up to and including this epoch.
    pub best_val_total: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned (1-based).
    pub best_epoch: usize,
    /// Set when patience ran out before the epoch budget.
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }

    /// First epoch whose validation total loss is at or below `target`.
    pub fn epochs_to_reach(&self, target: f64) -> Option<usize> {
        self.epochs.iter().find(|e| e.val.total <= target).map(|e| e.epoch)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Wait,
    Stop,
}

/// Stops after `patience` consecutive epochs without a strict improvement.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    bad_epochs: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            bad_epochs: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.bad_epochs = 0;
            StopDecision::Improved
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Wait
            }
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// A split materialised as contiguous inputs and label arrays.
pub struct Materialized {
    pub keys: Vec<WaveformKey>,
    pub values: Vec<f32>,
    pub mod_labels: Vec<usize>,
    pub sig_labels: Vec<usize>,
}

impl Materialized {
    pub fn new(data: &DatasetContainer, keys: &[WaveformKey]) -> Result<Self> {
        let mut values = Vec::with_capacity(keys.len() * VECTOR_LEN);
        for k in keys {
            values.extend_from_slice(data.values(k)?);
        }
        Ok(Materialized {
            keys: keys.to_vec(),
            values,
            mod_labels: keys.iter().map(|k| k.modulation().index()).collect(),
            sig_labels: keys.iter().map(|k| k.signal().index()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    fn gather(&self, idx: &[usize]) -> (Vec<f32>, Vec<usize>, Vec<usize>) {
        let mut v = Vec::with_capacity(idx.len() * VECTOR_LEN);
        for &i in idx {
            v.extend_from_slice(&self.values[i * VECTOR_LEN..(i + 1) * VECTOR_LEN]);
        }
        (
            v,
            idx.iter().map(|&i| self.mod_labels[i]).collect(),
            idx.iter().map(|&i| self.sig_labels[i]).collect(),
        )
    }
}

pub const EVAL_BATCH: usize = 512;

fn argmax_rows<T: Scalar>(p: &Tensor<T>) -> Vec<usize> {
    let k = p.shape()[1];
    p.data()
        .chunks(k)
        .map(|r| {
            let mut best = 0;
            for (i, v) in r.iter().enumerate() {
                if *v > r[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Inference-mode predictions `(modulation, signal)` for every record.
pub fn predict_values<T: Scalar>(model: &MtlModel<T>, values: &[f32]) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut pm = Vec::new();
    let mut ps = Vec::new();
    for chunk in values.chunks(EVAL_BATCH * VECTOR_LEN) {
        let (m, s) = model.infer(&image_batch(chunk)?)?;
        pm.extend(argmax_rows(&m));
        ps.extend(argmax_rows(&s));
    }
    Ok((pm, ps))
}

/// Inference-mode losses and accuracies of `model` on a split.
pub fn evaluate_metrics<T: Scalar>(model: &MtlModel<T>, split: &Materialized, w: TaskWeights) -> Result<Metrics> {
    if split.is_empty() {
        return Err(Error::EmptySplit("evaluation"));
    }
    let mut sums = [0.0f64; 3];
    let mut correct = [0usize; 2];
    let n = split.len();
    for start in (0..n).step_by(EVAL_BATCH) {
        let end = (start + EVAL_BATCH).min(n);
        let (pm, ps) = model.infer(&image_batch(&split.values[start * VECTOR_LEN..end * VECTOR_LEN])?)?;
        let lm = &split.mod_labels[start..end];
        let ls = &split.sig_labels[start..end];
        let (loss, _, _) = mtl_loss(&pm, &ps, lm, ls, w)?;
        let b = (end - start) as f64;
        sums[0] += loss.total * b;
        sums[1] += loss.l_m * b;
        sums[2] += loss.l_s * b;
        correct[0] += argmax_rows(&pm).iter().zip(lm).filter(|(a, b)| a == b).count();
        correct[1] += argmax_rows(&ps).iter().zip(ls).filter(|(a, b)| a == b).count();
    }
    let nf = n as f64;
    Ok(Metrics {
        total: sums[0] / nf,
        l_m: sums[1] / nf,
        l_s: sums[2] / nf,
        acc_m: correct[0] as f64 / nf,
        acc_s: correct[1] as f64 / nf,
    })
}

/// One epoch of shuffled mini-batch Adam updates. Returns running-mean
/// training metrics (train-mode forward passes).
fn train_epoch<T: Scalar>(
    model: &mut MtlModel<T>,
    adam: &mut AdamState<T>,
    train: &Materialized,
    cfg: &TrainConfig,
    epoch: usize,
    dropout_rng: &mut ChaCha8Rng,
) -> Result<Metrics> {
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0xE90C_0000 + epoch as u64)));
    let mut sums = [0.0f64; 3];
    let mut correct = [0usize; 2];
    let mut seen = 0usize;
    for idx in order.chunks(cfg.batch_size) {
        if idx.len() < 2 {
            continue;
        }
        let (values, lm, ls) = train.gather(idx);
        let x = image_batch::<T>(&values)?;
        let (pm, ps) = model.forward(&x, Mode::Train, dropout_rng)?;
        let (loss, gm, gs) = mtl_loss(&pm, &ps, &lm, &ls, cfg.weights)?;
        if !loss.total.is_finite() {
            return Err(Error::NonFinite("training loss"));
        }
        model.backward(&gm, &gs)?;
        adam.step(&mut model.params_mut())?;
        let b = idx.len() as f64;
        sums[0] += loss.total * b;
        sums[1] += loss.l_m * b;
        sums[2] += loss.l_s * b;
        correct[0] += argmax_rows(&pm).iter().zip(&lm).filter(|(a, b)| a == b).count();
        correct[1] += argmax_rows(&ps).iter().zip(&ls).filter(|(a, b)| a == b).count();
        seen += idx.len();
    }
    let nf = seen.max(1) as f64;
    Ok(Metrics {
        total: sums[0] / nf,
        l_m: sums[1] / nf,
        l_s: sums[2] / nf,
        acc_m: correct[0] as f64 / nf,
        acc_s: correct[1] as f64 / nf,
    })
}

/// Trains `model` in place and leaves it holding the parameters of the
/// epoch with the lowest validation total loss.
pub fn train<T: Scalar>(
    model: &mut MtlModel<T>,
    data: &DatasetContainer,
    splits: &Splits,
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    let train = Materialized::new(data, &splits.train)?;
    let val = Materialized::new(data, &splits.val)?;
    train_materialized(model, &train, &val, cfg)
}

pub fn train_materialized<T: Scalar>(
    model: &mut MtlModel<T>,
    train: &Materialized,
    val: &Materialized,
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if train.len() < 2 {
        return Err(Error::EmptySplit("train"));
    }
    if val.is_empty() {
        return Err(Error::EmptySplit("val"));
    }
    let mut adam = AdamState::for_params(cfg.lr, &model.params_mut());
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0xD809));
    let mut stopper = EarlyStopping::new(cfg.patience.max(1));
    let mut best = model.snapshot();
    let mut history = TrainHistory::default();
    for epoch in 1..=cfg.epochs {
        let train_m = train_epoch(model, &mut adam, train, cfg, epoch, &mut dropout_rng)?;
        let val_m = evaluate_metrics(model, val, cfg.weights)?;
        let decision = stopper.observe(epoch, val_m.total);
        if decision == StopDecision::Improved {
            best = model.snapshot();
        }
        history.epochs.push(EpochRecord {
            epoch,
            train: train_m,
            val: val_m,
            best_val_total: stopper.best(),
        });
        info!(
            "epoch {epoch}: train loss {:.4} (acc {:.3}/{:.3}), val loss {:.4} (acc {:.3}/{:.3})",
            train_m.total, train_m.acc_m, train_m.acc_s, val_m.total, val_m.acc_m, val_m.acc_s
        );
        if decision == StopDecision::Stop {
            debug!("early stop at epoch {epoch}, best epoch {}", stopper.best_epoch());
            history.stopped_early = epoch < cfg.epochs;
            break;
        }
    }
    model.restore(&best)?;
    history.best_epoch = stopper.best_epoch();
    Ok(history)
}

/// Warm-starts from a checkpoint (architecture must match `model`) and
/// runs the ordinary training loop.
pub fn transfer_train<T: Scalar>(
    model: &mut MtlModel<T>,
    init: &Checkpoint,
    data: &DatasetContainer,
    splits: &Splits,
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    model.load_checkpoint(init)?;
    train(model, data, splits, cfg)
}
