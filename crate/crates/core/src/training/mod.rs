//! Mini-batch AdamW training with a cosine-annealed learning rate.

mod optimizer;
mod schedule;

use std::io::Write;

use log::debug;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use optimizer::{adamw_step, OptimizerState};
pub use schedule::cosine_lr;

use crate::dynamics::PairDataset;
use crate::nn::{DeepResNet, Gradients, Workspace};
use crate::{rng, textio};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("training data is empty")]
    EmptyData,
    #[error("data dimension {found} does not match network dimension {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_min: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 100,
            lr0: 1e-3,
            lr_min: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_owned()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad("lr0 must be positive");
        }
        if !(0.0..=self.lr0).contains(&self.lr_min) {
            return bad("lr_min must lie in [0, lr0]");
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(TrainError::InvalidConfig(format!("{name} must lie in (0, 1)")));
            }
        }
        if !(self.eps > 0.0) {
            return bad("eps must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossHistory {
    pub epochs: Vec<EpochRecord>,
}

impl LossHistory {
    pub fn losses(&self) -> impl Iterator<Item = f64> + '_ {
        self.epochs.iter().map(|e| e.train_loss)
    }

    pub fn first_loss(&self) -> Option<f64> {
        self.epochs.first().map(|e| e.train_loss)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_loss)
    }

    /// CSV with header `epoch,lr,train_loss`; epochs are 0-based.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,lr,train_loss")?;
        for e in &self.epochs {
            writeln!(w, "{},{},{}", e.epoch, textio::real(e.lr), textio::real(e.train_loss))?;
        }
        Ok(())
    }
}

/// Trains `net` in place.
///
/// Each epoch reshuffles the pairs with a seed derived from
/// `(shuffle_seed, epoch)`, walks them in chunks of `batch_size` (the last
/// chunk may be smaller) and applies one AdamW step per chunk at
/// `cosine_lr(epoch)`. The recorded epoch loss is the pair-weighted mean of
/// the batch losses seen during the epoch.
pub fn train_in_place(
    net: &mut DeepResNet,
    data: &PairDataset,
    cfg: &TrainConfig,
) -> Result<LossHistory, TrainError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(TrainError::EmptyData);
    }
    if data.dim() != net.dim() {
        return Err(TrainError::Dimension {
            expected: net.dim(),
            found: data.dim(),
        });
    }
    let mut state = OptimizerState::new(net.parameter_count());
    let mut grads = Gradients::zeros_like(net);
    let mut ws = Workspace::new(net);
    let mut flat = vec![0.0; net.parameter_count()];
    let mut gflat = vec![0.0; net.parameter_count()];
    let mut order = Vec::with_capacity(data.len());
    let mut history = LossHistory::default();

    for epoch in 0..cfg.epochs {
        let lr = cosine_lr(epoch, cfg);
        shuffled_order_into(&mut order, data.len(), cfg.shuffle_seed, epoch);
        let mut total = 0.0;
        for (batch_index, batch) in order.chunks(cfg.batch_size).enumerate() {
            let loss = net.batch_loss_and_grad_into(data, batch, &mut grads, &mut ws);
            if !loss.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    batch: batch_index,
                });
            }
            total += loss * batch.len() as f64;
            for (dst, src) in flat.iter_mut().zip(net.parameters()) {
                *dst = src;
            }
            for (dst, src) in gflat.iter_mut().zip(grads.values()) {
                *dst = src;
            }
            adamw_step(&mut flat, &gflat, &mut state, lr, cfg);
            for (dst, src) in net.parameters_mut().zip(&flat) {
                *dst = *src;
            }
        }
        let train_loss = total / data.len() as f64;
        debug!("epoch {epoch}: lr {lr:.3e}, loss {train_loss:.6e}");
        history.epochs.push(EpochRecord { epoch, lr, train_loss });
    }
    Ok(history)
}

/// Pair visiting order for `epoch`: a permutation of `0..len` drawn from a
/// generator seeded by `(shuffle_seed, epoch)`.
pub fn epoch_order(len: usize, shuffle_seed: u64, epoch: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(len);
    shuffled_order_into(&mut order, len, shuffle_seed, epoch);
    order
}

fn shuffled_order_into(order: &mut Vec<usize>, len: usize, shuffle_seed: u64, epoch: usize) {
    order.clear();
    order.extend(0..len);
    let mut r = rng::seeded(rng::derive_seed(shuffle_seed, epoch as u64));
    order.shuffle(&mut r);
}

/// Trains a copy of `net0` and returns it with its loss history.
pub fn train(
    net0: &DeepResNet,
    data: &PairDataset,
    cfg: &TrainConfig,
) -> Result<(DeepResNet, LossHistory), TrainError> {
    let mut net = net0.clone();
    let history = train_in_place(&mut net, data, cfg)?;
    Ok((net, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::WeightSharing;

    fn identity_data(n: usize) -> PairDataset {
        let pairs: Vec<_> = (0..n)
            .map(|k| {
                let x = vec![(k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()];
                (x.clone(), x)
            })
            .collect();
        PairDataset::from_pairs(2, &pairs).unwrap()
    }

    fn linear_data(n: usize) -> PairDataset {
        let pairs: Vec<_> = (0..n)
            .map(|k| {
                let x = vec![(k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()];
                let y = vec![x[0] + 0.05 * x[1], x[1] - 0.05 * x[0]];
                (x, y)
            })
            .collect();
        PairDataset::from_pairs(2, &pairs).unwrap()
    }

    #[test]
    fn identity_targets_reach_zero_loss() {
        let net = DeepResNet::zeros(2, 5, 4, WeightSharing::Shared);
        let cfg = TrainConfig { epochs: 5, batch_size: 7, ..TrainConfig::default() };
        let (_, h) = train(&net, &identity_data(50), &cfg).unwrap();
        assert!(h.final_loss().unwrap() <= 1e-10);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let net = DeepResNet::kaiming(2, 6, 3, WeightSharing::Shared, 4);
        let cfg = TrainConfig { epochs: 4, batch_size: 16, shuffle_seed: 9, ..TrainConfig::default() };
        let data = linear_data(100);
        let (a, ha) = train(&net, &data, &cfg).unwrap();
        let (b, hb) = train(&net, &data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
        let other = TrainConfig { shuffle_seed: 10, ..cfg };
        assert_ne!(train(&net, &data, &other).unwrap().0, a);
    }

    #[test]
    fn training_reduces_loss() {
        let net = DeepResNet::kaiming(2, 8, 2, WeightSharing::Shared, 1);
        let cfg = TrainConfig { epochs: 40, batch_size: 10, lr0: 5e-3, ..TrainConfig::default() };
        let data = linear_data(200);
        let before = net.mean_loss(&data).unwrap();
        let (trained, h) = train(&net, &data, &cfg).unwrap();
        let after = trained.mean_loss(&data).unwrap();
        assert!(after < 0.1 * before, "{before} -> {after}");
        assert_eq!(h.epochs.len(), 40);
        assert_eq!(h.epochs[0].lr, cfg.lr0);
    }

    #[test]
    fn divergence_is_reported_with_location() {
        let mut net = DeepResNet::kaiming(2, 3, 2, WeightSharing::Shared, 1);
        net.blocks_mut()[0].b2[0] = f64::NAN;
        let cfg = TrainConfig { epochs: 2, ..TrainConfig::default() };
        match train(&net, &linear_data(10), &cfg) {
            Err(TrainError::Diverged { epoch: 0, batch: 0 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for cfg in [
            TrainConfig { epochs: 0, ..TrainConfig::default() },
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
            TrainConfig { lr0: 0.0, ..TrainConfig::default() },
            TrainConfig { lr_min: 1.0, ..TrainConfig::default() },
            TrainConfig { beta1: 1.0, ..TrainConfig::default() },
            TrainConfig { beta2: 0.0, ..TrainConfig::default() },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn loss_csv_layout() {
        let h = LossHistory {
            epochs: vec![EpochRecord { epoch: 0, lr: 1e-3, train_loss: 0.5 }],
        };
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "epoch,lr,train_loss\n0,1.0000000000000000e-3,5.0000000000000000e-1\n"
        );
    }
}
