use std::sync::Arc;

use super::{DynamicsError, TimeGrid, Trajectory};

/// Observed trajectories sharing one time grid, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStore {
    dim: usize,
    grid: TimeGrid,
    count: usize,
    states: Vec<f64>,
}

impl TrajectoryStore {
    pub fn new(grid: TimeGrid, trajectories: &[Trajectory]) -> Result<Self, DynamicsError> {
        let dim = trajectories.first().map_or(0, Trajectory::dim);
        if dim == 0 {
            return Err(DynamicsError::NotEnoughTrajectories {
                found: 0,
                required: 1,
            });
        }
        let mut states = Vec::with_capacity(trajectories.len() * grid.len() * dim);
        for t in trajectories {
            if t.dim() != dim || t.len() != grid.len() {
                return Err(DynamicsError::InvalidTrajectory(format!(
                    "trajectory of {} states of dimension {} does not fit grid of {} points, dimension {dim}",
                    t.len(),
                    t.dim(),
                    grid.len()
                )));
            }
            states.extend_from_slice(t.as_flat());
        }
        Ok(Self {
            dim,
            grid,
            count: trajectories.len(),
            states,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn trajectory_count(&self) -> usize {
        self.count
    }

    pub fn state(&self, traj: usize, j: usize) -> &[f64] {
        let start = (traj * self.grid.len() + j) * self.dim;
        &self.states[start..start + self.dim]
    }

    pub fn trajectory(&self, traj: usize) -> Trajectory {
        let len = self.grid.len() * self.dim;
        let start = traj * len;
        Trajectory::from_flat(
            self.dim,
            self.grid.delta(),
            self.states[start..start + len].to_vec(),
        )
        .expect("store rows are valid trajectories")
    }
}

/// `(trajectory, j)` address of the pair `(y_j, y_{j+1})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairRef {
    pub traj: u32,
    pub j: u32,
}

#[derive(Debug, Clone, Copy)]
pub struct Pair<'a> {
    pub traj: usize,
    pub j: usize,
    pub t: f64,
    pub input: &'a [f64],
    pub output: &'a [f64],
}

/// Consecutive-state pairs drawn from a shared [`TrajectoryStore`].
///
/// Subsets made by [`PairDataset::split_at_time`] share the store, so
/// re-partitioning never copies states.
#[derive(Debug, Clone)]
pub struct PairDataset {
    store: Arc<TrajectoryStore>,
    pairs: Vec<PairRef>,
}

impl PartialEq for PairDataset {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.store, &other.store) || self.store == other.store)
            && self.pairs == other.pairs
    }
}

impl PairDataset {
    pub fn new(store: Arc<TrajectoryStore>, pairs: Vec<PairRef>) -> Self {
        Self { store, pairs }
    }

    /// Every pair of the listed trajectories, trajectory-major.
    pub fn from_trajectories(store: Arc<TrajectoryStore>, trajs: impl IntoIterator<Item = usize>) -> Self {
        let steps = store.grid().len() - 1;
        let pairs = trajs
            .into_iter()
            .flat_map(|n| {
                (0..steps).map(move |j| PairRef {
                    traj: n as u32,
                    j: j as u32,
                })
            })
            .collect();
        Self { store, pairs }
    }

    /// Dataset of explicit `(input, output)` pairs, each stored as its own
    /// two-point trajectory at `t = 0`.
    pub fn from_pairs(dim: usize, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<Self, DynamicsError> {
        let trajs = pairs
            .iter()
            .map(|(a, b)| {
                if a.len() != dim || b.len() != dim {
                    return Err(DynamicsError::DimensionMismatch {
                        expected: dim,
                        found: a.len().max(b.len()),
                    });
                }
                Trajectory::from_flat(dim, 1.0, [a.as_slice(), b.as_slice()].concat())
            })
            .collect::<Result<Vec<_>, _>>()?;
        let store = Arc::new(TrajectoryStore::new(TimeGrid::new(1.0, 2)?, &trajs)?);
        Ok(Self::from_trajectories(store, 0..pairs.len()))
    }

    pub fn store(&self) -> &Arc<TrajectoryStore> {
        &self.store
    }

    pub fn dim(&self) -> usize {
        self.store.dim()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn refs(&self) -> &[PairRef] {
        &self.pairs
    }

    pub fn pair(&self, k: usize) -> Pair<'_> {
        let r = self.pairs[k];
        let (traj, j) = (r.traj as usize, r.j as usize);
        Pair {
            traj,
            j,
            t: self.store.grid().time(j),
            input: self.store.state(traj, j),
            output: self.store.state(traj, j + 1),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Pair<'_>> {
        (0..self.len()).map(move |k| self.pair(k))
    }

    pub fn time_of(&self, k: usize) -> f64 {
        self.store.grid().time(self.pairs[k].j as usize)
    }

    pub fn filter(&self, mut keep: impl FnMut(&Pair<'_>) -> bool) -> Self {
        let pairs = (0..self.len())
            .filter(|&k| keep(&self.pair(k)))
            .map(|k| self.pairs[k])
            .collect();
        Self {
            store: Arc::clone(&self.store),
            pairs,
        }
    }

    /// `(t_j <= t, t_j > t)`; a pair exactly at the split belongs to the left part.
    pub fn split_at_time(&self, t: f64) -> (Self, Self) {
        let (left, right): (Vec<PairRef>, Vec<PairRef>) = self
            .pairs
            .iter()
            .partition(|r| self.store.grid().time(r.j as usize) <= t);
        (
            Self {
                store: Arc::clone(&self.store),
                pairs: left,
            },
            Self {
                store: Arc::clone(&self.store),
                pairs: right,
            },
        )
    }
}

/// Training pairs from every trajectory but the last; validation pairs from the last.
pub fn build_datasets(
    store: Arc<TrajectoryStore>,
) -> Result<(PairDataset, PairDataset), DynamicsError> {
    let n = store.trajectory_count();
    if n < 2 {
        return Err(DynamicsError::NotEnoughTrajectories {
            found: n,
            required: 2,
        });
    }
    let train = PairDataset::from_trajectories(Arc::clone(&store), 0..n - 1);
    let validation = PairDataset::from_trajectories(store, [n - 1]);
    Ok((train, validation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn store(n: usize, steps: usize) -> Arc<TrajectoryStore> {
        let grid = TimeGrid::new(1.0, steps).unwrap();
        let trajs: Vec<Trajectory> = (0..n)
            .map(|k| {
                let states: Vec<f64> = (0..steps).map(|j| (k * 1000 + j) as f64).collect();
                Trajectory::from_flat(1, grid.delta(), states).unwrap()
            })
            .collect();
        Arc::new(TrajectoryStore::new(grid, &trajs).unwrap())
    }

    #[test]
    fn full_scale_counts() {
        let (train, val) = build_datasets(store(200, 801)).unwrap();
        assert_eq!(train.len(), 159_200);
        assert_eq!(val.len(), 800);
    }

    #[test]
    fn heat_scale_counts() {
        let (train, val) = build_datasets(store(5000, 201)).unwrap();
        assert_eq!(train.len(), 4999 * 200);
        assert_eq!(val.len(), 200);
    }

    #[test]
    fn minimal_counts() {
        let (train, val) = build_datasets(store(2, 2)).unwrap();
        assert_eq!((train.len(), val.len()), (1, 1));
    }

    #[test]
    fn one_trajectory_is_not_enough() {
        assert!(matches!(
            build_datasets(store(1, 5)),
            Err(DynamicsError::NotEnoughTrajectories { found: 1, .. })
        ));
    }

    #[test]
    fn pairs_are_consecutive_states() {
        let (train, val) = build_datasets(store(3, 6)).unwrap();
        for p in train.iter().chain(val.iter()) {
            assert_eq!(p.output[0], p.input[0] + 1.0);
            assert_eq!(p.input[0], (p.traj * 1000 + p.j) as f64);
        }
        assert!(val.iter().all(|p| p.traj == 2));
    }

    #[test]
    fn partition_covers_each_pair_once() {
        let s = store(4, 9);
        let (train, val) = build_datasets(Arc::clone(&s)).unwrap();
        let mut seen = HashSet::new();
        for r in train.refs().iter().chain(val.refs()) {
            assert!(seen.insert(*r), "duplicate {r:?}");
        }
        assert_eq!(seen.len(), 4 * 8);
    }

    #[test]
    fn split_assigns_boundary_pair_left() {
        let grid = TimeGrid::new(40.0, 801).unwrap();
        let traj = Trajectory::from_flat(1, grid.delta(), vec![0.0; 801]).unwrap();
        let s = Arc::new(TrajectoryStore::new(grid, &[traj.clone(), traj]).unwrap());
        let (train, _) = build_datasets(s).unwrap();
        let (left, right) = train.split_at_time(20.0);
        assert_eq!(left.len() + right.len(), train.len());
        assert!(left.iter().any(|p| p.t == 20.0));
        assert!(right.iter().all(|p| p.t > 20.0));
    }

    #[test]
    fn explicit_pairs() {
        let d = PairDataset::from_pairs(2, &[(vec![1.0, 2.0], vec![3.0, 4.0])]).unwrap();
        let p = d.pair(0);
        assert_eq!((p.input, p.output), (&[1.0, 2.0][..], &[3.0, 4.0][..]));
        assert!(PairDataset::from_pairs(2, &[(vec![1.0], vec![3.0, 4.0])]).is_err());
    }
}
