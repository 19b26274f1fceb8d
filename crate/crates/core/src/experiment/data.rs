use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use log::info;
use serde::{Deserialize, Serialize};

use super::{
    create_dir, read_text, to_json, write_text, write_with, ExperimentConfig, ExperimentError, Seeds,
    CONFIG_FILE, DATA_MANIFEST_FILE, TRAJECTORIES_FILE,
};
use crate::adaptive::{dnn_al, ALResult};
use crate::dynamics::{
    add_noise, build_datasets, read_trajectories, sample_initial_states, write_trajectories, Integrator,
    TrajectoryStore,
};
use crate::rng;

pub const DATA_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataManifest {
    pub format: String,
    pub version: u32,
    pub benchmark: String,
    pub config_hash: String,
    pub seeds: Seeds,
    pub scale: f64,
    pub trajectories: usize,
    pub steps: usize,
    pub delta: f64,
    pub t_max: f64,
    pub dim: usize,
    pub noise: f64,
    pub integrator: String,
    pub substeps: usize,
    pub trajectories_file: String,
}

/// Samples initial states, integrates the benchmark and applies measurement
/// noise. Trajectory `n` gets noise seed `derive_seed(seeds.noise, n)`.
pub fn generate(cfg: &ExperimentConfig) -> Result<Arc<TrajectoryStore>, ExperimentError> {
    cfg.validate()?;
    let bench = cfg.benchmark();
    let grid = cfg.grid()?;
    let integrator = Integrator::default();
    let samples = sample_initial_states(&cfg.domain, cfg.trajectories, cfg.seeds.data)?;
    let mut trajs = Vec::with_capacity(samples.len());
    for (n, s) in samples.iter().enumerate() {
        let x0 = bench.initial_map.apply(s);
        let clean = integrator.integrate_on(&bench.system, &x0, &grid)?;
        let observed = if cfg.noise > 0.0 {
            add_noise(&clean, cfg.noise, rng::derive_seed(cfg.seeds.noise, n as u64))?
        } else {
            clean
        };
        trajs.push(observed);
    }
    info!(
        "generated {} trajectories of {} ({} points, noise {})",
        trajs.len(),
        bench.name,
        grid.len(),
        cfg.noise
    );
    Ok(Arc::new(TrajectoryStore::new(grid, &trajs)?))
}

/// Writes `config.json`, `trajectories.csv` and `manifest.json` into `dir`.
pub fn write_data(dir: &Path, cfg: &ExperimentConfig, store: &TrajectoryStore) -> Result<(), ExperimentError> {
    create_dir(dir)?;
    write_text(&dir.join(CONFIG_FILE), &cfg.to_pretty_json())?;
    write_with(&dir.join(TRAJECTORIES_FILE), |w| write_trajectories(w, store))?;
    let manifest = DataManifest {
        format: "switchlearn-data".into(),
        version: DATA_FORMAT_VERSION,
        benchmark: cfg.benchmark.to_string(),
        config_hash: cfg.hash(),
        seeds: cfg.seeds,
        scale: cfg.scale,
        trajectories: store.trajectory_count(),
        steps: store.grid().len(),
        delta: store.grid().delta(),
        t_max: store.grid().t_max(),
        dim: store.dim(),
        noise: cfg.noise,
        integrator: "rk4".into(),
        substeps: Integrator::default().substeps,
        trajectories_file: TRAJECTORIES_FILE.into(),
    };
    write_text(&dir.join(DATA_MANIFEST_FILE), &to_json(&manifest))
}

/// Reads a directory written by [`write_data`] and checks that the
/// trajectories match the configuration.
pub fn load_data(dir: &Path) -> Result<(ExperimentConfig, Arc<TrajectoryStore>), ExperimentError> {
    let cfg = ExperimentConfig::from_json(&read_text(&dir.join(CONFIG_FILE))?)?;
    let path = dir.join(TRAJECTORIES_FILE);
    let file = std::fs::File::open(&path).map_err(|e| ExperimentError::io(&path, e))?;
    let store = read_trajectories(BufReader::new(file))?;
    let grid = cfg.grid()?;
    let dim = cfg.benchmark().dim();
    if store.trajectory_count() != cfg.trajectories || store.grid().len() != grid.len() || store.dim() != dim {
        return Err(ExperimentError::Data(format!(
            "{} holds {} trajectories of {} points in dimension {}, config expects {} x {} in dimension {dim}",
            path.display(),
            store.trajectory_count(),
            store.grid().len(),
            store.dim(),
            cfg.trajectories,
            grid.len()
        )));
    }
    if (store.grid().t_max() - grid.t_max()).abs() > 1e-9 * grid.t_max() {
        return Err(ExperimentError::Data(format!(
            "{} spans [0, {}], config expects [0, {}]",
            path.display(),
            store.grid().t_max(),
            grid.t_max()
        )));
    }
    Ok((cfg, Arc::new(store)))
}

/// Splits the data into training and validation sets and runs the adaptive loop.
pub fn run(cfg: &ExperimentConfig, store: Arc<TrajectoryStore>) -> Result<ALResult, ExperimentError> {
    cfg.validate()?;
    let t_max = store.grid().t_max();
    let (train, validation) = build_datasets(store)?;
    Ok(dnn_al(&train, &validation, t_max, &cfg.run_settings())?)
}
