use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use super::{
    bound_check, evaluate, generate, run, to_json, validation_mse, write_bound, write_data, write_evaluation,
    write_run, write_text, BoundSummary, EpsilonSource, ExperimentConfig, ExperimentError, MuDomain, Seeds, SUMMARY_FILE,
};
use crate::adaptive::ExitReason;
use crate::dynamics::BenchmarkName;
use crate::evaluation::PiecewiseModel;

/// Measurement-noise levels of the noise study on `oscillator2`.
pub const NOISE_LEVELS: [f64; 3] = [0.02, 0.05, 0.1];

/// Published test MSEs of the noise study, in the order of [`NOISE_LEVELS`].
const PUBLISHED_NOISE_MSE: [f64; 3] = [2.442e-2, 4.451e-2, 1.061e-1];

/// Accepted ratio between observed and published values at full scale.
const PUBLISHED_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ReproduceOptions {
    pub scale: f64,
    pub seeds: Option<Seeds>,
    pub shuffle_seed: Option<u64>,
    pub tol: Option<f64>,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        Self {
            scale: 1.0,
            seeds: None,
            shuffle_seed: None,
            tol: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub observed: String,
    pub expected: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, observed: impl Into<String>, expected: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            observed: observed.into(),
            expected: expected.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub directory: String,
    pub config_hash: String,
    pub noise: f64,
    pub k_hat: usize,
    pub exit_reason: ExitReason,
    pub endpoints: Vec<f64>,
    pub identified_switches: Vec<Option<f64>>,
    pub test_mse: f64,
    pub validation_mse: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceSummary {
    pub benchmark: String,
    pub scale: f64,
    pub full_scale: bool,
    pub true_switches: Vec<f64>,
    pub runs: Vec<RunSummary>,
    pub bound: Option<BoundSummary>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

struct Stage {
    summary: RunSummary,
    model: PiecewiseModel,
    store: std::sync::Arc<crate::dynamics::TrajectoryStore>,
}

fn run_stage(cfg: &ExperimentConfig, out: &Path, label: &str) -> Result<Stage, ExperimentError> {
    let dir = out.join(label);
    let tag = |s: &str| format!("{label}/{s}");
    info!("{label}: generating data");
    let store = generate(cfg).map_err(|e| e.in_stage(&tag("gen")))?;
    write_data(&dir, cfg, &store).map_err(|e| e.in_stage(&tag("gen")))?;
    info!("{label}: running the adaptive loop");
    let result = run(cfg, std::sync::Arc::clone(&store)).map_err(|e| e.in_stage(&tag("run")))?;
    let manifest = write_run(&dir, cfg, &result).map_err(|e| e.in_stage(&tag("run")))?;
    let nets = result.state.intervals.iter().map(|r| r.net.clone()).collect();
    let model = PiecewiseModel::new(manifest.endpoints.clone(), nets).map_err(|e| ExperimentError::from(e).in_stage(&tag("run")))?;
    let (prediction, eval) = evaluate(cfg, &model, None).map_err(|e| e.in_stage(&tag("eval")))?;
    write_evaluation(&dir, &prediction, &eval).map_err(|e| e.in_stage(&tag("eval")))?;
    let val_mse = validation_mse(&model, &store).map_err(|e| e.in_stage(&tag("eval")))?;
    Ok(Stage {
        summary: RunSummary {
            label: label.to_string(),
            directory: label.to_string(),
            config_hash: cfg.hash(),
            noise: cfg.noise,
            k_hat: manifest.k_hat,
            exit_reason: manifest.exit_reason,
            endpoints: manifest.endpoints,
            identified_switches: eval.identified_switches,
            test_mse: eval.test_mse,
            validation_mse: val_mse,
            max_abs_error: eval.max_abs_error,
        },
        model,
        store,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

/// Largest iteration count observed in the published runs of each benchmark.
fn published_iterations(name: BenchmarkName) -> usize {
    match name {
        BenchmarkName::Oscillator2 => 7,
        BenchmarkName::Oscillator3 => 8,
        BenchmarkName::Pendulum => 5,
        BenchmarkName::Heat => 6,
    }
}

/// Runs data generation, the adaptive loop, evaluation and (on
/// `oscillator2`) the noise study and the bound check, then writes
/// `summary.json` into `out`. The returned summary says whether every check
/// passed; a failed check is not an error.
pub fn reproduce(name: BenchmarkName, opts: &ReproduceOptions, out: &Path) -> Result<ReproduceSummary, ExperimentError> {
    let mut cfg = ExperimentConfig::for_benchmark(name).scaled(opts.scale)?;
    if let Some(seeds) = opts.seeds {
        cfg.seeds = seeds;
    }
    if let Some(s) = opts.shuffle_seed {
        cfg.train.shuffle_seed = s;
    }
    if let Some(tol) = opts.tol {
        cfg.adaptive.tol = tol;
    }
    cfg.validate()?;
    super::create_dir(out)?;
    let full_scale = opts.scale >= 1.0;
    let bench = cfg.benchmark();
    let t_max = bench.t_max();
    let true_switches = bench.system.schedule().switch_times().to_vec();
    let id_tol = t_max / 32.0;

    let clean = run_stage(&cfg, out, "clean")?;
    let mut checks = Vec::new();
    for (k, (&t1, found)) in true_switches.iter().zip(&clean.summary.identified_switches).enumerate() {
        let ok = found.is_some_and(|t| (t - t1).abs() <= id_tol);
        checks.push(Check::new(
            format!("switch_{k}_identified"),
            ok,
            fmt_opt(*found),
            format!("endpoint within {id_tol} of {t1}"),
        ));
    }
    if full_scale {
        let cap = published_iterations(name);
        checks.push(Check::new(
            "iterations_within_published",
            clean.summary.k_hat <= cap,
            clean.summary.k_hat.to_string(),
            format!("<= {cap}"),
        ));
    }
    if full_scale && name == BenchmarkName::Oscillator2 {
        let found = clean.summary.identified_switches[0];
        checks.push(Check::new(
            "identified_switch_matches_published",
            found.is_some_and(|t| (t - 27.5).abs() < 1e-9),
            fmt_opt(found),
            "27.5",
        ));
    }
    if full_scale && name == BenchmarkName::Heat {
        let e = clean.summary.max_abs_error;
        checks.push(Check::new("max_pointwise_error", e <= 0.1, e.to_string(), "<= 0.1 (published about 0.04)"));
    }

    let mut runs = vec![clean.summary.clone()];
    let mut bound = None;
    if name == BenchmarkName::Oscillator2 {
        let mut noisy = Vec::new();
        for eta in NOISE_LEVELS {
            let mut c = cfg.clone();
            c.noise = eta;
            let stage = run_stage(&c, out, &format!("noise_{eta}"))?;
            noisy.push(stage.summary.test_mse);
            runs.push(stage.summary);
        }
        let monotone = noisy.windows(2).all(|w| w[0] <= w[1]);
        let ratio = noisy[2] / noisy[0];
        let observed = format!("{noisy:?}");
        checks.push(Check::new("noise_mse_non_decreasing", monotone, observed.clone(), "non-decreasing"));
        checks.push(Check::new("noise_mse_growth", ratio >= 2.0, ratio.to_string(), ">= 2"));
        if full_scale {
            for ((eta, got), want) in NOISE_LEVELS.iter().zip(&noisy).zip(PUBLISHED_NOISE_MSE) {
                let r = got / want;
                checks.push(Check::new(
                    format!("noise_{eta}_mse_matches_published"),
                    (1.0 / PUBLISHED_FACTOR..=PUBLISHED_FACTOR).contains(&r),
                    got.to_string(),
                    format!("within a factor {PUBLISHED_FACTOR} of {want}"),
                ));
            }
        }

        let dir = out.join("clean");
        let (report, b) = bound_check(&cfg, &clean.model, clean.store, None, &MuDomain::DataBox, EpsilonSource::FlowMap)
            .map_err(|e| e.in_stage("clean/bound"))?;
        write_bound(&dir, &report, &b).map_err(|e| e.in_stage("clean/bound"))?;
        checks.push(Check::new(
            "bound_dominates_in_hull_errors",
            b.dominated,
            format!("{} exceedances, {} hull violations of {} rows", b.exceedances, b.hull_violations, b.rows),
            "0 exceedances",
        ));
        bound = Some(b);
    }

    let passed = checks.iter().all(|c| c.passed);
    let summary = ReproduceSummary {
        benchmark: name.to_string(),
        scale: opts.scale,
        full_scale,
        true_switches,
        runs,
        bound,
        checks,
        passed,
    };
    write_text(&out.join(SUMMARY_FILE), &to_json(&summary))?;
    Ok(summary)
}
