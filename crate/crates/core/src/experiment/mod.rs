//! End-to-end experiments: configuration, data generation, adaptive runs,
//! model bundles, evaluation and reproduction summaries.
//!
//! Every stage reads and writes plain files in an output directory:
//!
//! | file | written by |
//! |------|------------|
//! | `config.json`, `trajectories.csv`, `manifest.json` | [`write_data`] |
//! | `run_manifest.json`, `timing.json`, `models/`, `losses/` | [`write_run`] |
//! | `prediction.csv`, `metrics.json` | [`write_evaluation`] |
//! | `bound.csv`, `bound.json`, `hull_violations.csv` | [`write_bound`] |
//! | `summary.json` | [`reproduce`] |

mod assess;
mod bundle;
mod config;
mod data;
mod reproduce;

pub use assess::{
    bound_check, evaluate, partition_by_endpoints, predict, validation_mse, write_bound, write_evaluation,
    BoundSummary, EpsilonSource, EvalSummary, MuDomain, Prediction,
};
pub use bundle::{load_bundle, write_run, IntervalEntry, IterationEntry, RunManifest, RUN_FORMAT_VERSION};
pub use config::{ExperimentConfig, Seeds, MIN_SCALED_EPOCHS, MIN_SCALED_TRAJECTORIES};
pub use data::{generate, load_data, run, write_data, DataManifest, DATA_FORMAT_VERSION};
pub use reproduce::{reproduce, Check, ReproduceOptions, ReproduceSummary, RunSummary, NOISE_LEVELS};

use std::path::{Path, PathBuf};

use crate::adaptive::AdaptiveError;
use crate::dynamics::DynamicsError;
use crate::evaluation::EvalError;
use crate::nn::NetError;
use crate::training::TrainError;

pub const CONFIG_FILE: &str = "config.json";
pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const DATA_MANIFEST_FILE: &str = "manifest.json";
pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";
pub const TIMING_FILE: &str = "timing.json";
pub const MODELS_DIR: &str = "models";
pub const MODEL_INDEX_FILE: &str = "index.csv";
pub const LOSSES_DIR: &str = "losses";
pub const PREDICTION_FILE: &str = "prediction.csv";
pub const HEAT_ERROR_FILE: &str = "pointwise_error.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const BOUND_FILE: &str = "bound.csv";
pub const BOUND_SUMMARY_FILE: &str = "bound.json";
pub const HULL_VIOLATIONS_FILE: &str = "hull_violations.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("divergence: {0}")]
    Divergence(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<ExperimentError>,
    },
}

impl ExperimentError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn in_stage(self, stage: &str) -> Self {
        Self::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    /// The error with stage wrappers removed.
    pub fn root(&self) -> &ExperimentError {
        match self {
            Self::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

impl From<DynamicsError> for ExperimentError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Diverged { .. } => Self::Divergence(e.to_string()),
            other => Self::Data(other.to_string()),
        }
    }
}

impl From<TrainError> for ExperimentError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Diverged { .. } => Self::Divergence(e.to_string()),
            TrainError::InvalidConfig(_) => Self::Config(e.to_string()),
            other => Self::Data(other.to_string()),
        }
    }
}

impl From<AdaptiveError> for ExperimentError {
    fn from(e: AdaptiveError) -> Self {
        match e {
            AdaptiveError::Training {
                source: TrainError::Diverged { .. },
                ..
            } => Self::Divergence(e.to_string()),
            AdaptiveError::InvalidConfig(_) => Self::Config(e.to_string()),
            other => Self::Data(other.to_string()),
        }
    }
}

impl From<EvalError> for ExperimentError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::NonFinite { .. } => Self::Divergence(e.to_string()),
            other => Self::Data(other.to_string()),
        }
    }
}

impl From<NetError> for ExperimentError {
    fn from(e: NetError) -> Self {
        Self::Data(e.to_string())
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, ExperimentError> {
    std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), ExperimentError> {
    std::fs::write(path, text).map_err(|e| ExperimentError::io(path, e))
}

pub(crate) fn create_dir(path: &Path) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(path).map_err(|e| ExperimentError::io(path, e))
}

pub(crate) fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("manifest serializes");
    s.push('\n');
    s
}

/// Writes into an in-memory buffer and then to `path` in one call.
pub(crate) fn write_with(
    path: &Path,
    fill: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
) -> Result<(), ExperimentError> {
    let mut buf = Vec::new();
    fill(&mut buf).map_err(|e| ExperimentError::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| ExperimentError::io(path, e))
}
