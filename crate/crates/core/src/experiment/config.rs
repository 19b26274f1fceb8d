use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ExperimentError;
use crate::adaptive::{ALConfig, NetShape, RunSettings};
use crate::dynamics::{Benchmark, BenchmarkName, BoxDomain, TimeGrid};
use crate::training::TrainConfig;

/// Smallest trajectory count and epoch count a scaled configuration keeps.
pub const MIN_SCALED_TRAJECTORIES: usize = 10;
pub const MIN_SCALED_EPOCHS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    /// Initial-state sampling.
    pub data: u64,
    pub noise: u64,
    /// Network initialization.
    pub init: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { data: 1, noise: 2, init: 3 }
    }
}

/// Complete description of one experiment; serialized as JSON.
///
/// The shuffle seed lives in `train.shuffle_seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: BenchmarkName,
    pub trajectories: usize,
    pub delta: f64,
    pub steps: usize,
    pub domain: BoxDomain,
    pub noise: f64,
    pub net: NetShape,
    pub train: TrainConfig,
    pub adaptive: ALConfig,
    pub seeds: Seeds,
    pub scale: f64,
}

impl ExperimentConfig {
    /// Full-scale defaults of a benchmark.
    pub fn for_benchmark(name: BenchmarkName) -> Self {
        let b = Benchmark::get(name);
        Self {
            benchmark: name,
            trajectories: b.trajectories,
            delta: b.delta,
            steps: b.steps,
            domain: b.domain.clone(),
            noise: 0.0,
            net: NetShape {
                hidden: b.hidden,
                steps: b.blocks,
                ..NetShape::default()
            },
            train: TrainConfig {
                shuffle_seed: 4,
                ..TrainConfig::default()
            },
            adaptive: ALConfig::default(),
            seeds: Seeds::default(),
            scale: 1.0,
        }
    }

    pub fn benchmark(&self) -> Benchmark {
        Benchmark::get(self.benchmark)
    }

    /// Multiplies trajectory and epoch counts by `s` (with floors); grid,
    /// architecture and tolerance are untouched.
    pub fn scaled(&self, s: f64) -> Result<Self, ExperimentError> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(ExperimentError::Config(format!("scale must be positive, got {s}")));
        }
        let scale_count = |n: usize, floor: usize| ((n as f64 * s).floor() as usize).max(floor);
        let mut c = self.clone();
        c.trajectories = scale_count(self.trajectories, MIN_SCALED_TRAJECTORIES);
        c.train.epochs = scale_count(self.train.epochs, MIN_SCALED_EPOCHS);
        c.adaptive.child_epochs = self
            .adaptive
            .child_epochs
            .map(|e| scale_count(e, MIN_SCALED_EPOCHS));
        c.scale = self.scale * s;
        Ok(c)
    }

    pub fn grid(&self) -> Result<TimeGrid, ExperimentError> {
        let t_max = self.benchmark().t_max();
        TimeGrid::from_delta(t_max, self.delta, self.steps)
            .map_err(|e| ExperimentError::Config(format!("time grid: {e}")))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        let b = self.benchmark();
        self.grid()?;
        if self.trajectories < 2 {
            return bad(format!("need at least 2 trajectories, got {}", self.trajectories));
        }
        if self.domain.dim() != b.domain.dim() {
            return bad(format!(
                "domain has dimension {}, benchmark {} samples in dimension {}",
                self.domain.dim(),
                b.name,
                b.domain.dim()
            ));
        }
        self.domain
            .validate()
            .map_err(|e| ExperimentError::Config(format!("domain: {e}")))?;
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be non-negative, got {}", self.noise));
        }
        if self.net.hidden == 0 || self.net.steps == 0 {
            return bad("network hidden width and block count must be positive".into());
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return bad(format!("scale must be positive, got {}", self.scale));
        }
        self.train
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        self.adaptive
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn run_settings(&self) -> RunSettings {
        RunSettings {
            adaptive: self.adaptive.clone(),
            net: self.net,
            train: self.train.clone(),
            init_seed: self.seeds.init,
        }
    }

    /// Compact JSON with fields in declaration order.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn to_pretty_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let c: Self = serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// First 16 hex digits of the SHA-256 of [`ExperimentConfig::canonical_json`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
