use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BoxDomain, DynamicsError, SignalSchedule, SwitchedSystem, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkName {
    Oscillator2,
    Oscillator3,
    Pendulum,
    Heat,
}

impl BenchmarkName {
    pub const ALL: [BenchmarkName; 4] = [
        BenchmarkName::Oscillator2,
        BenchmarkName::Oscillator3,
        BenchmarkName::Pendulum,
        BenchmarkName::Heat,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkName::Oscillator2 => "oscillator2",
            BenchmarkName::Oscillator3 => "oscillator3",
            BenchmarkName::Pendulum => "pendulum",
            BenchmarkName::Heat => "heat",
        }
    }
}

impl fmt::Display for BenchmarkName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkName {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| DynamicsError::UnknownBenchmark(s.to_string()))
    }
}

/// How a sampled point of the benchmark's domain becomes an initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialStateMap {
    /// The sample is the state.
    Direct,
    /// The sample is the amplitude `a` of `u_0(x) = a x (1 - x)` on the heat grid.
    HeatProfile { grid_nodes: usize },
}

impl InitialStateMap {
    pub fn apply(&self, sample: &[f64]) -> Vec<f64> {
        match *self {
            InitialStateMap::Direct => sample.to_vec(),
            InitialStateMap::HeatProfile { grid_nodes } => {
                let a = sample[0];
                (0..grid_nodes)
                    .map(|i| {
                        let x = i as f64 / (grid_nodes - 1) as f64;
                        a * x * (1.0 - x)
                    })
                    .collect()
            }
        }
    }
}

/// A named switched benchmark with its default experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub name: BenchmarkName,
    pub system: SwitchedSystem,
    /// Domain sampled for initial states (or initial-state parameters).
    pub domain: BoxDomain,
    pub initial_map: InitialStateMap,
    pub delta: f64,
    /// Grid points per trajectory `J`.
    pub steps: usize,
    pub trajectories: usize,
    pub hidden: usize,
    pub blocks: usize,
    /// Held-out test sample, in the same coordinates as `domain`.
    pub test_sample: Vec<f64>,
}

const OSC_T_MAX: f64 = 40.0;

fn oscillator(damping: f64, forcing: f64) -> VectorField {
    VectorField::Oscillator {
        stiffness: 1.0,
        damping,
        forcing,
    }
}

impl Benchmark {
    pub fn get(name: BenchmarkName) -> Self {
        let build = |fields: Vec<VectorField>, switches: Vec<f64>, t_max: f64| {
            SwitchedSystem::new(
                fields,
                SignalSchedule::new(switches, t_max).expect("benchmark schedule is valid"),
            )
            .expect("benchmark system is valid")
        };
        match name {
            BenchmarkName::Oscillator2 => Self {
                name,
                system: build(
                    vec![oscillator(0.1, 2.0), oscillator(0.5, 10.0)],
                    vec![27.6],
                    OSC_T_MAX,
                ),
                domain: BoxDomain::cube(2, -3.0, 3.0).expect("valid box"),
                initial_map: InitialStateMap::Direct,
                delta: 0.05,
                steps: 801,
                trajectories: 200,
                hidden: 20,
                blocks: 10,
                test_sample: vec![2.0, 1.0],
            },
            BenchmarkName::Oscillator3 => Self {
                name,
                system: build(
                    vec![
                        oscillator(0.1, 2.0),
                        oscillator(0.2, 4.0),
                        oscillator(0.4, 8.0),
                    ],
                    vec![17.4, 27.6],
                    OSC_T_MAX,
                ),
                domain: BoxDomain::cube(2, -3.0, 3.0).expect("valid box"),
                initial_map: InitialStateMap::Direct,
                delta: 0.05,
                steps: 801,
                trajectories: 200,
                hidden: 20,
                blocks: 10,
                test_sample: vec![1.0, 0.0],
            },
            BenchmarkName::Pendulum => {
                let pendulum = |forcing| VectorField::Pendulum {
                    damping: 0.15,
                    gravity: 9.8,
                    forcing,
                };
                Self {
                    name,
                    system: build(vec![pendulum(0.0), pendulum(2.0)], vec![15.2], OSC_T_MAX),
                    domain: BoxDomain::new(vec![-PI / 2.0, -PI], vec![PI / 2.0, PI])
                        .expect("valid box"),
                    initial_map: InitialStateMap::Direct,
                    delta: 0.05,
                    steps: 801,
                    trajectories: 200,
                    hidden: 20,
                    blocks: 10,
                    test_sample: vec![0.0, -2.0],
                }
            }
            BenchmarkName::Heat => {
                let heat = |source_amplitude| VectorField::HeatSemidiscrete {
                    diffusivity: 0.2,
                    grid_nodes: 21,
                    source_amplitude,
                };
                Self {
                    name,
                    system: build(vec![heat(20.0), heat(10.0)], vec![1.2], 2.0),
                    domain: BoxDomain::cube(1, 0.0, 1.0).expect("valid box"),
                    initial_map: InitialStateMap::HeatProfile { grid_nodes: 21 },
                    delta: 0.01,
                    steps: 201,
                    trajectories: 5000,
                    hidden: 50,
                    blocks: 10,
                    test_sample: vec![1.0],
                }
            }
        }
    }

    pub fn by_name(name: &str) -> Result<Self, DynamicsError> {
        Ok(Self::get(name.parse()?))
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn t_max(&self) -> f64 {
        self.system.schedule().t_max()
    }

    pub fn test_initial_state(&self) -> Vec<f64> {
        self.initial_map.apply(&self.test_sample)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for b in BenchmarkName::ALL {
            assert_eq!(b.as_str().parse::<BenchmarkName>().unwrap(), b);
        }
        assert!("lorenz".parse::<BenchmarkName>().is_err());
    }

    #[test]
    fn grids_are_consistent() {
        for b in BenchmarkName::ALL.map(Benchmark::get) {
            let span = (b.steps - 1) as f64 * b.delta;
            assert!((span - b.t_max()).abs() < 1e-12 * b.t_max(), "{}", b.name);
            assert_eq!(b.initial_map.apply(&b.test_sample).len(), b.dim());
        }
    }

    #[test]
    fn oscillator2_defaults() {
        let b = Benchmark::get(BenchmarkName::Oscillator2);
        assert_eq!((b.trajectories, b.steps, b.delta), (200, 801, 0.05));
        assert_eq!(b.system.schedule().switch_times(), &[27.6]);
        assert_eq!(b.domain, BoxDomain::cube(2, -3.0, 3.0).unwrap());
    }

    #[test]
    fn heat_defaults() {
        let b = Benchmark::get(BenchmarkName::Heat);
        assert_eq!((b.trajectories, b.steps, b.delta, b.dim()), (5000, 201, 0.01, 21));
        assert_eq!(b.hidden, 50);
        let u0 = b.test_initial_state();
        assert_eq!(u0[0], 0.0);
        assert_eq!(u0[20], 0.0);
        assert!((u0[10] - 0.25).abs() < 1e-15);
    }
}
