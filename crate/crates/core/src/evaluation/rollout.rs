use super::EvalError;
use crate::dynamics::{TimeGrid, Trajectory};
use crate::nn::{DeepResNet, Workspace};

/// Local networks on the intervals `(endpoints[i], endpoints[i + 1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseModel {
    endpoints: Vec<f64>,
    nets: Vec<DeepResNet>,
}

/// A predicted trajectory plus the interval used for each step.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub trajectory: Trajectory,
    /// `intervals[j]` produced state `j + 1` from state `j`.
    pub intervals: Vec<usize>,
}

impl PiecewiseModel {
    pub fn new(endpoints: Vec<f64>, nets: Vec<DeepResNet>) -> Result<Self, EvalError> {
        if nets.is_empty() || endpoints.len() != nets.len() + 1 {
            return Err(EvalError::InvalidModel(format!(
                "{} endpoints for {} networks",
                endpoints.len(),
                nets.len()
            )));
        }
        if endpoints[0] != 0.0 || endpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(EvalError::InvalidModel(
                "endpoints must increase strictly from 0".into(),
            ));
        }
        let dim = nets[0].dim();
        if nets.iter().any(|n| n.dim() != dim) {
            return Err(EvalError::InvalidModel("networks disagree on dimension".into()));
        }
        Ok(Self { endpoints, nets })
    }

    pub fn endpoints(&self) -> &[f64] {
        &self.endpoints
    }

    pub fn nets(&self) -> &[DeepResNet] {
        &self.nets
    }

    pub fn dim(&self) -> usize {
        self.nets[0].dim()
    }

    pub fn t_max(&self) -> f64 {
        *self.endpoints.last().expect("non-empty")
    }

    /// Interval holding `t`: the first with `t <= t_hi`; times past the last
    /// endpoint map to the last interval.
    pub fn interval_of(&self, t: f64) -> usize {
        let i = self.endpoints[1..].partition_point(|&e| e < t);
        i.min(self.nets.len() - 1)
    }

    /// Autoregressive prediction on `grid` from `x0`.
    pub fn rollout(&self, x0: &[f64], grid: &TimeGrid) -> Result<Rollout, EvalError> {
        let d = self.dim();
        if x0.len() != d {
            return Err(EvalError::Dimension {
                expected: d,
                found: x0.len(),
            });
        }
        let mut workspaces: Vec<Workspace> = self.nets.iter().map(Workspace::new).collect();
        let mut states = Vec::with_capacity(grid.len() * d);
        let mut intervals = Vec::with_capacity(grid.len().saturating_sub(1));
        states.extend_from_slice(x0);
        let mut y = x0.to_vec();
        for j in 0..grid.len() - 1 {
            let i = self.interval_of(grid.time(j));
            let next = self.nets[i].forward_ws(&y, &mut workspaces[i]);
            y.copy_from_slice(next);
            if y.iter().any(|v| !v.is_finite()) {
                return Err(EvalError::NonFinite { j: j + 1 });
            }
            states.extend_from_slice(&y);
            intervals.push(i);
        }
        Ok(Rollout {
            trajectory: Trajectory::from_flat(d, grid.delta(), states)?,
            intervals,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{BlockParams, WeightSharing};

    fn shift(by: f64) -> DeepResNet {
        let b = BlockParams { w1: vec![0.0], b1: vec![0.0], w2: vec![0.0], b2: vec![by] };
        DeepResNet::from_blocks(1, 1, 1, WeightSharing::Shared, vec![b]).unwrap()
    }

    #[test]
    fn identity_model_rolls_out_constant() {
        let net = DeepResNet::zeros(2, 3, 4, WeightSharing::Shared);
        let m = PiecewiseModel::new(vec![0.0, 1.0, 2.0], vec![net.clone(), net]).unwrap();
        let r = m.rollout(&[0.3, -0.4], &TimeGrid::new(2.0, 11).unwrap()).unwrap();
        assert!(r.trajectory.states().all(|s| s == [0.3, -0.4]));
    }

    #[test]
    fn single_interval_is_iterated_forward() {
        let net = DeepResNet::kaiming(2, 4, 2, WeightSharing::Shared, 8);
        let m = PiecewiseModel::new(vec![0.0, 1.0], vec![net.clone()]).unwrap();
        let r = m.rollout(&[0.5, 0.1], &TimeGrid::new(1.0, 6).unwrap()).unwrap();
        let mut y = vec![0.5, 0.1];
        for j in 1..6 {
            y = net.forward(&y).unwrap();
            assert_eq!(r.trajectory.state(j), y.as_slice());
        }
    }

    #[test]
    fn steps_use_the_interval_of_their_start_time() {
        // +1 on [0,1], +10 on (1,2]; grid t = 0, 0.5, 1, 1.5, 2.
        let m = PiecewiseModel::new(vec![0.0, 1.0, 2.0], vec![shift(1.0), shift(10.0)]).unwrap();
        let r = m.rollout(&[0.0], &TimeGrid::new(2.0, 5).unwrap()).unwrap();
        assert_eq!(r.intervals, vec![0, 0, 0, 1]);
        assert_eq!(r.trajectory.as_flat(), &[0.0, 1.0, 2.0, 3.0, 13.0]);
    }

    #[test]
    fn rejects_bad_models_and_inputs() {
        let n = DeepResNet::zeros(1, 1, 1, WeightSharing::Shared);
        assert!(PiecewiseModel::new(vec![0.0, 1.0, 2.0], vec![n.clone()]).is_err());
        assert!(PiecewiseModel::new(vec![0.0, 2.0, 1.0], vec![n.clone(), n.clone()]).is_err());
        assert!(PiecewiseModel::new(vec![0.5, 1.0], vec![n.clone()]).is_err());
        let m = PiecewiseModel::new(vec![0.0, 1.0], vec![n]).unwrap();
        assert!(m.rollout(&[0.0, 1.0], &TimeGrid::new(1.0, 3).unwrap()).is_err());
        let blow = PiecewiseModel::new(vec![0.0, 1.0], vec![shift(f64::MAX)]).unwrap();
        assert!(matches!(
            blow.rollout(&[f64::MAX], &TimeGrid::new(1.0, 3).unwrap()),
            Err(EvalError::NonFinite { j: 1 })
        ));
    }
}
