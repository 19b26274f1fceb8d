//! Adaptive bisection of the time domain with one network per interval.
//!
//! The loop starts from a single interval `[0, T]`, trains a network on it
//! and then repeatedly bisects the splittable interval with the largest
//! validation error. Both children start as exact copies of the parent
//! network and are trained on the parent's pairs that fall inside them.
//! Pairs are assigned by the time `t_j` of their input state, intervals are
//! right-closed, and the first interval also holds `t = 0`.

mod state;

pub use state::{
    select_interval, split_interval, validation_error, warm_start, AdaptiveState, IntervalRecord,
    SplitGuards, SplitOutcome,
};

use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use crate::dynamics::PairDataset;
use crate::nn::{DeepResNet, NetError, WeightSharing};
use crate::rng;
use crate::training::{self, LossHistory, TrainConfig, TrainError};

#[derive(Debug, thiserror::Error)]
pub enum AdaptiveError {
    #[error("invalid adaptive configuration: {0}")]
    InvalidConfig(String),
    #[error("no splittable interval remains")]
    NothingSplittable,
    #[error("interval index {index} out of range for {count} intervals")]
    BadIndex { index: usize, count: usize },
    #[error("empty {0} dataset")]
    EmptyData(&'static str),
    #[error("training on ({t_lo}, {t_hi}] failed: {source}")]
    Training {
        t_lo: f64,
        t_hi: f64,
        #[source]
        source: TrainError,
    },
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Architecture of every local network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetShape {
    pub hidden: usize,
    pub steps: usize,
    #[serde(default)]
    pub sharing: WeightSharing,
}

impl Default for NetShape {
    fn default() -> Self {
        Self {
            hidden: 20,
            steps: 10,
            sharing: WeightSharing::Shared,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ALConfig {
    pub tol: f64,
    /// Upper bound on the adaptivity step, i.e. on the number of intervals.
    pub max_iterations: usize,
    pub min_train_pairs: usize,
    pub min_validation_pairs: usize,
    /// Epochs for child trainings; `None` reuses `train.epochs`.
    pub child_epochs: Option<usize>,
    /// Also train a freshly initialized network for one epoch on each child
    /// dataset and record its loss next to the warm-started one.
    pub compare_fresh_init: bool,
}

impl Default for ALConfig {
    fn default() -> Self {
        Self {
            tol: 0.005,
            max_iterations: 20,
            min_train_pairs: 2,
            min_validation_pairs: 1,
            child_epochs: None,
            compare_fresh_init: false,
        }
    }
}

impl ALConfig {
    pub fn validate(&self) -> Result<(), AdaptiveError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(AdaptiveError::InvalidConfig("tol must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(AdaptiveError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if self.min_train_pairs == 0 || self.min_validation_pairs == 0 {
            return Err(AdaptiveError::InvalidConfig("minimum pair counts must be at least 1".into()));
        }
        if self.child_epochs == Some(0) {
            return Err(AdaptiveError::InvalidConfig("child_epochs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn guards(&self) -> SplitGuards {
        SplitGuards {
            min_train_pairs: self.min_train_pairs,
            min_validation_pairs: self.min_validation_pairs,
        }
    }
}

/// Everything the loop needs besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub adaptive: ALConfig,
    pub net: NetShape,
    pub train: TrainConfig,
    pub init_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitReason {
    ToleranceReached,
    MaxIterations,
    NothingSplittable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Adaptivity step after this split, equal to the number of intervals.
    pub iteration: usize,
    /// 0-based index of the bisected interval before the split.
    pub selected: usize,
    pub split_point: f64,
    pub parent_val_error: f64,
    pub endpoints: Vec<f64>,
    pub val_errors: Vec<f64>,
    pub child_val_errors: [f64; 2],
    pub child_train_pairs: [usize; 2],
    pub warm_first_epoch_loss: [f64; 2],
    pub fresh_first_epoch_loss: Option<[f64; 2]>,
    pub child_histories: [LossHistory; 2],
    /// Intervals marked unsplittable while searching for this split.
    pub rejected: Vec<(f64, f64)>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ALResult {
    pub state: AdaptiveState,
    pub initial_history: LossHistory,
    pub initial_val_error: f64,
    pub iterations: Vec<IterationRecord>,
    pub exit: ExitReason,
    pub initial_wall_seconds: f64,
}

fn child_seed(base: u64, iteration: usize, child: usize) -> u64 {
    rng::derive_seed(rng::derive_seed(base, iteration as u64), child as u64)
}

fn train_record(
    rec: &mut IntervalRecord,
    cfg: &TrainConfig,
) -> Result<(), AdaptiveError> {
    let history = training::train_in_place(&mut rec.net, &rec.train, cfg).map_err(|source| {
        AdaptiveError::Training {
            t_lo: rec.t_lo,
            t_hi: rec.t_hi,
            source,
        }
    })?;
    rec.val_error = validation_error(&rec.net, &rec.validation)?;
    rec.history = history;
    Ok(())
}

fn stop_reason(state: &AdaptiveState, cfg: &ALConfig) -> Option<ExitReason> {
    let max = state
        .intervals
        .iter()
        .map(|r| r.val_error)
        .fold(f64::NEG_INFINITY, f64::max);
    if max < cfg.tol {
        return Some(ExitReason::ToleranceReached);
    }
    if state.k_hat() >= cfg.max_iterations {
        return Some(ExitReason::MaxIterations);
    }
    if !state
        .intervals
        .iter()
        .any(|r| r.splittable && r.val_error >= cfg.tol)
    {
        return Some(ExitReason::NothingSplittable);
    }
    None
}

/// Runs the adaptive loop on `(train, validation)` over `[0, t_max]`.
pub fn dnn_al(
    train: &PairDataset,
    validation: &PairDataset,
    t_max: f64,
    settings: &RunSettings,
) -> Result<ALResult, AdaptiveError> {
    let cfg = &settings.adaptive;
    cfg.validate()?;
    settings
        .train
        .validate()
        .map_err(|e| AdaptiveError::InvalidConfig(e.to_string()))?;
    if train.is_empty() {
        return Err(AdaptiveError::EmptyData("training"));
    }
    if validation.is_empty() {
        return Err(AdaptiveError::EmptyData("validation"));
    }
    let shape = settings.net;
    let dim = train.dim();
    let child_cfg = TrainConfig {
        epochs: cfg.child_epochs.unwrap_or(settings.train.epochs),
        ..settings.train.clone()
    };

    let start = Instant::now();
    let net0 = DeepResNet::kaiming(dim, shape.hidden, shape.steps, shape.sharing, settings.init_seed);
    let mut state = AdaptiveState::new(t_max, cfg.tol, train.clone(), validation.clone(), net0)?;
    let first_cfg = TrainConfig {
        shuffle_seed: child_seed(settings.train.shuffle_seed, 0, 0),
        ..settings.train.clone()
    };
    train_record(&mut state.intervals[0], &first_cfg)?;
    let initial_history = state.intervals[0].history.clone();
    let initial_val_error = state.intervals[0].val_error;
    let initial_wall_seconds = start.elapsed().as_secs_f64();
    info!("initial interval (0, {t_max}]: validation error {initial_val_error:.6e}");

    let guards = cfg.guards();
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut rejected = Vec::new();
    let exit = loop {
        if let Some(reason) = stop_reason(&state, cfg) {
            break reason;
        }
        let started = Instant::now();
        let i = select_interval(&state)?;
        let (t_lo, t_hi) = (state.intervals[i].t_lo, state.intervals[i].t_hi);
        let parent_val_error = state.intervals[i].val_error;
        let split_point = match split_interval(&mut state, i, &guards)? {
            SplitOutcome::Split { split_point } => split_point,
            SplitOutcome::MarkedUnsplittable => {
                info!("interval ({t_lo}, {t_hi}] cannot be split further");
                rejected.push((t_lo, t_hi));
                continue;
            }
        };
        let iteration = state.k_hat();

        let mut fresh = None;
        if cfg.compare_fresh_init {
            let mut losses = [0.0; 2];
            for (c, loss) in losses.iter_mut().enumerate() {
                let rec = &state.intervals[i + c];
                let init_seed = child_seed(settings.init_seed, iteration, c);
                let fresh_net = DeepResNet::kaiming(dim, shape.hidden, shape.steps, shape.sharing, init_seed);
                let one = TrainConfig {
                    epochs: 1,
                    shuffle_seed: child_seed(settings.train.shuffle_seed, iteration, c),
                    ..child_cfg.clone()
                };
                let (_, h) = training::train(&fresh_net, &rec.train, &one).map_err(|source| {
                    AdaptiveError::Training { t_lo: rec.t_lo, t_hi: rec.t_hi, source }
                })?;
                *loss = h.first_loss().expect("one epoch recorded");
            }
            fresh = Some(losses);
        }

        for c in 0..2 {
            let cfg_c = TrainConfig {
                shuffle_seed: child_seed(settings.train.shuffle_seed, iteration, c),
                ..child_cfg.clone()
            };
            train_record(&mut state.intervals[i + c], &cfg_c)?;
        }
        let (left, right) = (&state.intervals[i], &state.intervals[i + 1]);
        let record = IterationRecord {
            iteration,
            selected: i,
            split_point,
            parent_val_error,
            endpoints: state.endpoints(),
            val_errors: state.val_errors(),
            child_val_errors: [left.val_error, right.val_error],
            child_train_pairs: [left.train.len(), right.train.len()],
            warm_first_epoch_loss: [
                left.history.first_loss().unwrap_or(f64::NAN),
                right.history.first_loss().unwrap_or(f64::NAN),
            ],
            fresh_first_epoch_loss: fresh,
            child_histories: [left.history.clone(), right.history.clone()],
            rejected: std::mem::take(&mut rejected),
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        info!(
            "iteration {iteration}: split ({t_lo}, {t_hi}] at {split_point}, child errors {:.3e} / {:.3e}",
            record.child_val_errors[0], record.child_val_errors[1]
        );
        iterations.push(record);
    };
    info!("adaptive loop finished with {} intervals: {exit:?}", state.k_hat());
    Ok(ALResult {
        state,
        initial_history,
        initial_val_error,
        iterations,
        exit,
        initial_wall_seconds,
    })
}
