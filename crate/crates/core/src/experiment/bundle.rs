use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    create_dir, read_text, to_json, write_text, write_with, ExperimentConfig, ExperimentError, CONFIG_FILE,
    LOSSES_DIR, MODELS_DIR, MODEL_INDEX_FILE, RUN_MANIFEST_FILE, TIMING_FILE,
};
use crate::adaptive::{ALResult, ExitReason};
use crate::evaluation::PiecewiseModel;
use crate::nn::{read_model, write_model, DeepResNet, ModelMeta};
use crate::training::LossHistory;

pub const RUN_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationEntry {
    pub iteration: usize,
    pub selected: usize,
    pub split_point: f64,
    pub parent_val_error: f64,
    pub endpoints: Vec<f64>,
    pub val_errors: Vec<f64>,
    pub child_val_errors: [f64; 2],
    pub child_train_pairs: [usize; 2],
    pub warm_first_epoch_loss: [f64; 2],
    pub fresh_first_epoch_loss: Option<[f64; 2]>,
    pub rejected: Vec<(f64, f64)>,
    pub loss_files: [String; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalEntry {
    pub t_lo: f64,
    pub t_hi: f64,
    pub val_error: f64,
    pub train_pairs: usize,
    pub validation_pairs: usize,
    pub splittable: bool,
    pub final_train_loss: Option<f64>,
    pub model: String,
}

/// Everything a run decided, without wall-clock data, so reruns with the
/// same configuration produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub benchmark: String,
    pub config_hash: String,
    pub exit_reason: ExitReason,
    pub k_hat: usize,
    pub endpoints: Vec<f64>,
    pub split_history: Vec<f64>,
    pub initial_val_error: f64,
    pub initial_final_train_loss: Option<f64>,
    pub initial_loss_file: String,
    pub iterations: Vec<IterationEntry>,
    pub intervals: Vec<IntervalEntry>,
}

#[derive(Serialize)]
struct Timing {
    initial_seconds: f64,
    iteration_seconds: Vec<(usize, f64)>,
    total_seconds: f64,
}

fn write_history(dir: &Path, name: &str, h: &LossHistory) -> Result<String, ExperimentError> {
    let rel = format!("{LOSSES_DIR}/{name}");
    write_with(&dir.join(&rel), |w| h.write_csv(w))?;
    Ok(rel)
}

/// Writes models, loss curves, `run_manifest.json`, `timing.json` and a copy
/// of the configuration into `dir`.
pub fn write_run(dir: &Path, cfg: &ExperimentConfig, result: &ALResult) -> Result<RunManifest, ExperimentError> {
    create_dir(&dir.join(MODELS_DIR))?;
    create_dir(&dir.join(LOSSES_DIR))?;
    write_text(&dir.join(CONFIG_FILE), &cfg.to_pretty_json())?;
    let hash = cfg.hash();
    let meta = ModelMeta {
        seed: cfg.seeds.init,
        config_hash: hash.clone(),
    };

    let initial_loss_file = write_history(dir, "initial.csv", &result.initial_history)?;
    let mut iterations = Vec::with_capacity(result.iterations.len());
    for r in &result.iterations {
        let left = write_history(dir, &format!("iteration_{:03}_left.csv", r.iteration), &r.child_histories[0])?;
        let right = write_history(dir, &format!("iteration_{:03}_right.csv", r.iteration), &r.child_histories[1])?;
        iterations.push(IterationEntry {
            iteration: r.iteration,
            selected: r.selected,
            split_point: r.split_point,
            parent_val_error: r.parent_val_error,
            endpoints: r.endpoints.clone(),
            val_errors: r.val_errors.clone(),
            child_val_errors: r.child_val_errors,
            child_train_pairs: r.child_train_pairs,
            warm_first_epoch_loss: r.warm_first_epoch_loss,
            fresh_first_epoch_loss: r.fresh_first_epoch_loss,
            rejected: r.rejected.clone(),
            loss_files: [left, right],
        });
    }

    let mut index = String::from("t_lo,t_hi,path\n");
    let mut intervals = Vec::with_capacity(result.state.intervals.len());
    for (i, rec) in result.state.intervals.iter().enumerate() {
        let rel = format!("{MODELS_DIR}/interval_{i:03}.model");
        write_with(&dir.join(&rel), |w| write_model(w, &rec.net, &meta))?;
        index.push_str(&format!("{},{},{rel}\n", rec.t_lo, rec.t_hi));
        intervals.push(IntervalEntry {
            t_lo: rec.t_lo,
            t_hi: rec.t_hi,
            val_error: rec.val_error,
            train_pairs: rec.train.len(),
            validation_pairs: rec.validation.len(),
            splittable: rec.splittable,
            final_train_loss: rec.history.final_loss(),
            model: rel,
        });
    }
    write_text(&dir.join(MODELS_DIR).join(MODEL_INDEX_FILE), &index)?;

    let manifest = RunManifest {
        format: "switchlearn-run".into(),
        version: RUN_FORMAT_VERSION,
        benchmark: cfg.benchmark.to_string(),
        config_hash: hash,
        exit_reason: result.exit,
        k_hat: result.state.k_hat(),
        endpoints: result.state.endpoints(),
        split_history: result.state.split_history.clone(),
        initial_val_error: result.initial_val_error,
        initial_final_train_loss: result.initial_history.final_loss(),
        initial_loss_file,
        iterations,
        intervals,
    };
    write_text(&dir.join(RUN_MANIFEST_FILE), &to_json(&manifest))?;

    let iteration_seconds: Vec<(usize, f64)> =
        result.iterations.iter().map(|r| (r.iteration, r.wall_seconds)).collect();
    let timing = Timing {
        initial_seconds: result.initial_wall_seconds,
        total_seconds: result.initial_wall_seconds + iteration_seconds.iter().map(|(_, s)| s).sum::<f64>(),
        iteration_seconds,
    };
    write_text(&dir.join(TIMING_FILE), &to_json(&timing))?;
    Ok(manifest)
}

fn parse_index(text: &str, path: &Path) -> Result<Vec<(f64, f64, String)>, ExperimentError> {
    let bad = |line: usize, m: &str| ExperimentError::Data(format!("{}:{line}: {m}", path.display()));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "t_lo,t_hi,path")) => {}
        _ => return Err(bad(1, "expected header 't_lo,t_hi,path'")),
    }
    let mut rows = Vec::new();
    for (k, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(bad(k + 1, "expected 3 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(k + 1, "bad number"));
        rows.push((num(fields[0])?, num(fields[1])?, fields[2].to_string()));
    }
    if rows.is_empty() {
        return Err(bad(2, "no intervals listed"));
    }
    Ok(rows)
}

/// Loads a run directory: its configuration, manifest and piecewise model.
/// Networks whose shape disagrees with the configuration are rejected.
pub fn load_bundle(dir: &Path) -> Result<(ExperimentConfig, RunManifest, PiecewiseModel), ExperimentError> {
    let cfg = ExperimentConfig::from_json(&read_text(&dir.join(CONFIG_FILE))?)?;
    let manifest_path = dir.join(RUN_MANIFEST_FILE);
    let manifest: RunManifest = serde_json::from_str(&read_text(&manifest_path)?)
        .map_err(|e| ExperimentError::Data(format!("{}: {e}", manifest_path.display())))?;
    if manifest.config_hash != cfg.hash() {
        return Err(ExperimentError::Data(format!(
            "run manifest was written for config {}, {} holds config {}",
            manifest.config_hash,
            CONFIG_FILE,
            cfg.hash()
        )));
    }
    let index_path = dir.join(MODELS_DIR).join(MODEL_INDEX_FILE);
    let rows = parse_index(&read_text(&index_path)?, &index_path)?;
    let dim = cfg.benchmark().dim();
    let mut endpoints = vec![0.0];
    let mut nets: Vec<DeepResNet> = Vec::with_capacity(rows.len());
    for (k, (t_lo, t_hi, rel)) in rows.into_iter().enumerate() {
        if t_lo != *endpoints.last().expect("nonempty") {
            return Err(ExperimentError::Data(format!(
                "{}: interval {k} starts at {t_lo}, previous ends at {}",
                index_path.display(),
                endpoints.last().expect("nonempty")
            )));
        }
        endpoints.push(t_hi);
        let path = dir.join(&rel);
        let file = std::fs::File::open(&path).map_err(|e| ExperimentError::io(&path, e))?;
        let (net, _) = read_model(BufReader::new(file))
            .map_err(|e| ExperimentError::Data(format!("{}: {e}", path.display())))?;
        let expected = (dim, cfg.net.hidden, cfg.net.steps, cfg.net.sharing);
        let found = (net.dim(), net.hidden(), net.steps(), net.sharing());
        if found != expected {
            return Err(ExperimentError::Data(format!(
                "{}: network shape (dim, hidden, blocks, sharing) = {found:?}, config expects {expected:?}",
                path.display()
            )));
        }
        nets.push(net);
    }
    if endpoints != manifest.endpoints {
        return Err(ExperimentError::Data(format!(
            "{} and {} disagree on the partition",
            index_path.display(),
            RUN_MANIFEST_FILE
        )));
    }
    Ok((cfg, manifest, PiecewiseModel::new(endpoints, nets)?))
}

#[cfg(test)]
mod tests {
    use super::super::{generate, run};
    use super::*;
    use crate::dynamics::BenchmarkName;

    fn tiny_run() -> (ExperimentConfig, ALResult) {
        let mut c = ExperimentConfig::for_benchmark(BenchmarkName::Oscillator2);
        c.trajectories = 3;
        c.train.epochs = 2;
        c.net.hidden = 4;
        c.net.steps = 2;
        c.adaptive.max_iterations = 3;
        c.adaptive.tol = 1e-12;
        let store = generate(&c).unwrap();
        let r = run(&c, store).unwrap();
        (c, r)
    }

    #[test]
    fn bundle_round_trip_and_shape_check() {
        let (c, r) = tiny_run();
        let dir = tempfile::tempdir().unwrap();
        let m = write_run(dir.path(), &c, &r).unwrap();
        assert_eq!(m.k_hat, 3);
        assert_eq!(m.iterations.len(), 2);
        for e in &m.iterations {
            for f in &e.loss_files {
                assert!(dir.path().join(f).exists());
            }
        }
        let (c2, m2, model) = load_bundle(dir.path()).unwrap();
        assert_eq!((c2, m2), (c.clone(), m));
        assert_eq!(model.endpoints(), r.state.endpoints().as_slice());
        for (net, rec) in model.nets().iter().zip(&r.state.intervals) {
            assert_eq!(net, &rec.net);
        }

        let mut wrong = c.clone();
        wrong.net.steps = 3;
        let mut r2 = r.clone();
        r2.state.intervals[1].net = DeepResNet::zeros(2, 4, 3, wrong.net.sharing);
        let dir2 = tempfile::tempdir().unwrap();
        write_run(dir2.path(), &c, &r2).unwrap();
        assert!(matches!(load_bundle(dir2.path()), Err(ExperimentError::Data(m)) if m.contains("shape")));
    }

    #[test]
    fn manifest_is_byte_stable() {
        let (c, r) = tiny_run();
        let (_, r2) = tiny_run();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        write_run(a.path(), &c, &r).unwrap();
        write_run(b.path(), &c, &r2).unwrap();
        for f in [RUN_MANIFEST_FILE, "models/interval_001.model", "models/index.csv", "losses/initial.csv"] {
            assert_eq!(
                std::fs::read(a.path().join(f)).unwrap(),
                std::fs::read(b.path().join(f)).unwrap(),
                "{f}"
            );
        }
    }
}
