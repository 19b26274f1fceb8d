use super::AdaptiveError;
use crate::dynamics::PairDataset;
use crate::nn::DeepResNet;
use crate::training::LossHistory;

/// One sub-interval `(t_lo, t_hi]` with its data and local network.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRecord {
    pub t_lo: f64,
    pub t_hi: f64,
    pub train: PairDataset,
    pub validation: PairDataset,
    pub net: DeepResNet,
    pub val_error: f64,
    pub splittable: bool,
    /// Loss history of the network's most recent training.
    pub history: LossHistory,
}

/// The current partition, in increasing time order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveState {
    pub intervals: Vec<IntervalRecord>,
    pub split_history: Vec<f64>,
    pub tol: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitGuards {
    pub min_train_pairs: usize,
    pub min_validation_pairs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitOutcome {
    Split { split_point: f64 },
    MarkedUnsplittable,
}

/// Mean squared one-step error of `net` on `validation`.
pub fn validation_error(net: &DeepResNet, validation: &PairDataset) -> Result<f64, AdaptiveError> {
    if validation.is_empty() {
        return Err(AdaptiveError::EmptyData("validation"));
    }
    Ok(net.mean_loss(validation)?)
}

/// Child networks for a bisection: independent copies of the parent.
pub fn warm_start(parent: &DeepResNet) -> (DeepResNet, DeepResNet) {
    (parent.clone(), parent.clone())
}

impl AdaptiveState {
    /// Single interval `[0, t_max]` holding all data; its error is computed
    /// for the given (untrained) network.
    pub fn new(
        t_max: f64,
        tol: f64,
        train: PairDataset,
        validation: PairDataset,
        net: DeepResNet,
    ) -> Result<Self, AdaptiveError> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(AdaptiveError::InvalidConfig(format!("t_max must be positive, got {t_max}")));
        }
        let val_error = validation_error(&net, &validation)?;
        Ok(Self {
            intervals: vec![IntervalRecord {
                t_lo: 0.0,
                t_hi: t_max,
                train,
                validation,
                net,
                val_error,
                splittable: true,
                history: LossHistory::default(),
            }],
            split_history: Vec::new(),
            tol,
            t_max,
        })
    }

    /// Number of intervals.
    pub fn k_hat(&self) -> usize {
        self.intervals.len()
    }

    /// `0 = t_0 < t_1 < ... < t_K = t_max`.
    pub fn endpoints(&self) -> Vec<f64> {
        std::iter::once(0.0)
            .chain(self.intervals.iter().map(|r| r.t_hi))
            .collect()
    }

    pub fn val_errors(&self) -> Vec<f64> {
        self.intervals.iter().map(|r| r.val_error).collect()
    }

    /// Index of the interval containing `t`; the first interval is closed at 0.
    pub fn interval_index(&self, t: f64) -> Option<usize> {
        if !(0.0..=self.t_max).contains(&t) {
            return None;
        }
        let i = self.intervals.partition_point(|r| r.t_hi < t);
        Some(i.min(self.intervals.len() - 1))
    }
}

/// Index of the splittable interval with the largest validation error;
/// ties go to the smallest index.
pub fn select_interval(state: &AdaptiveState) -> Result<usize, AdaptiveError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in state.intervals.iter().enumerate() {
        if r.splittable && best.is_none_or(|(_, e)| r.val_error > e) {
            best = Some((i, r.val_error));
        }
    }
    best.map(|(i, _)| i).ok_or(AdaptiveError::NothingSplittable)
}

/// Bisects interval `i` at its midpoint.
///
/// Both children receive copies of the parent's network and the parent's
/// pairs on their side of the midpoint, and their validation errors are
/// recomputed. If either child would fall below a guard the parent is
/// marked unsplittable and nothing else changes.
pub fn split_interval(
    state: &mut AdaptiveState,
    i: usize,
    guards: &SplitGuards,
) -> Result<SplitOutcome, AdaptiveError> {
    let count = state.intervals.len();
    let parent = state
        .intervals
        .get(i)
        .ok_or(AdaptiveError::BadIndex { index: i, count })?;
    if !parent.splittable {
        return Err(AdaptiveError::NothingSplittable);
    }
    let mid = 0.5 * (parent.t_lo + parent.t_hi);
    let (train_l, train_r) = parent.train.split_at_time(mid);
    let (val_l, val_r) = parent.validation.split_at_time(mid);
    let too_small = |train: &PairDataset, val: &PairDataset| {
        train.len() < guards.min_train_pairs || val.len() < guards.min_validation_pairs
    };
    if !(mid > parent.t_lo && mid < parent.t_hi)
        || too_small(&train_l, &val_l)
        || too_small(&train_r, &val_r)
    {
        state.intervals[i].splittable = false;
        return Ok(SplitOutcome::MarkedUnsplittable);
    }
    let (net_l, net_r) = warm_start(&parent.net);
    let left = IntervalRecord {
        t_lo: parent.t_lo,
        t_hi: mid,
        val_error: validation_error(&net_l, &val_l)?,
        train: train_l,
        validation: val_l,
        net: net_l,
        splittable: true,
        history: LossHistory::default(),
    };
    let right = IntervalRecord {
        t_lo: mid,
        t_hi: parent.t_hi,
        val_error: validation_error(&net_r, &val_r)?,
        train: train_r,
        validation: val_r,
        net: net_r,
        splittable: true,
        history: LossHistory::default(),
    };
    state.intervals.splice(i..=i, [left, right]);
    state.split_history.push(mid);
    Ok(SplitOutcome::Split { split_point: mid })
}
