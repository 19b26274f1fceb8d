//! Switched benchmark systems, trajectory generation, measurement noise and
//! paired datasets.

mod benchmark;
mod dataset;
mod field;
mod integrate;
mod io;
mod sampling;
mod system;

pub use benchmark::{Benchmark, BenchmarkName, InitialStateMap};
pub use dataset::{build_datasets, Pair, PairDataset, PairRef, TrajectoryStore};
pub use field::{heat_source, VectorField};
pub use integrate::{Integrator, Trajectory};
pub use io::{read_trajectories, write_trajectories};
pub use sampling::{add_noise, sample_initial_states, BoxDomain};
pub use system::{SignalSchedule, SwitchedSystem, TimeGrid};

#[derive(Debug, thiserror::Error)]
pub enum DynamicsError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("state became non-finite at time index {index} (t = {time})")]
    Diverged { index: usize, time: f64 },
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("noise level must be finite and non-negative, got {0}")]
    InvalidNoise(f64),
    #[error("at least one sample is required")]
    EmptySample,
    #[error("need at least {required} trajectories, found {found}")]
    NotEnoughTrajectories { found: usize, required: usize },
    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),
    #[error("trajectory file: {0}")]
    Parse(String),
}
