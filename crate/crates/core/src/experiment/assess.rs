use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    create_dir, to_json, write_text, write_with, ExperimentConfig, ExperimentError, BOUND_FILE,
    BOUND_SUMMARY_FILE, HEAT_ERROR_FILE, HULL_VIOLATIONS_FILE, METRICS_FILE, PREDICTION_FILE,
};
use crate::dynamics::{
    build_datasets, BenchmarkName, BoxDomain, Integrator, PairDataset, TimeGrid, Trajectory, TrajectoryStore,
};
use crate::evaluation::{
    check_bound, identified_switch, lipschitz_on_box, mse, observed_epsilon, one_step_epsilon, relative_error,
    sup_field_difference, write_heat_error_csv, write_prediction_csv, BoundInputs, BoundReport, PiecewiseModel,
    Rollout,
};

/// Grid resolution per dimension for Lipschitz and field-gap estimates.
const CONSTANT_GRID: usize = 41;

#[derive(Debug, Clone)]
pub struct Prediction {
    pub grid: TimeGrid,
    pub rollout: Rollout,
    /// Noise-free trajectory of the true system from the same initial state.
    pub reference: Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub benchmark: String,
    pub config_hash: String,
    pub initial_state: Vec<f64>,
    pub k_hat: usize,
    pub endpoints: Vec<f64>,
    pub true_switches: Vec<f64>,
    /// Interior endpoint nearest to each true switch, if any.
    pub identified_switches: Vec<Option<f64>>,
    pub test_mse: f64,
    pub final_relative_error: Option<f64>,
    pub max_relative_error: Option<f64>,
    pub max_abs_error: f64,
}

/// Rolls the model out from `x0` on the configured grid next to the exact
/// trajectory of the benchmark.
pub fn predict(cfg: &ExperimentConfig, model: &PiecewiseModel, x0: &[f64]) -> Result<Prediction, ExperimentError> {
    let grid = cfg.grid()?;
    let reference = Integrator::default().integrate_on(&cfg.benchmark().system, x0, &grid)?;
    let rollout = model.rollout(x0, &grid)?;
    Ok(Prediction { grid, rollout, reference })
}

fn interior(endpoints: &[f64]) -> &[f64] {
    &endpoints[1..endpoints.len() - 1]
}

/// Evaluates the model from `x0`, or from the benchmark's test state.
pub fn evaluate(
    cfg: &ExperimentConfig,
    model: &PiecewiseModel,
    x0: Option<&[f64]>,
) -> Result<(Prediction, EvalSummary), ExperimentError> {
    let bench = cfg.benchmark();
    let x0 = x0.map(<[f64]>::to_vec).unwrap_or_else(|| bench.test_initial_state());
    let p = predict(cfg, model, &x0)?;
    let pred = &p.rollout.trajectory;
    let rel: Vec<f64> = (0..pred.len())
        .filter_map(|j| relative_error(pred, &p.reference, j).ok())
        .collect();
    let final_rel = relative_error(pred, &p.reference, pred.len() - 1).ok();
    let max_abs_error = pred
        .as_flat()
        .iter()
        .zip(p.reference.as_flat())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let endpoints = model.endpoints().to_vec();
    let true_switches = bench.system.schedule().switch_times().to_vec();
    let summary = EvalSummary {
        benchmark: cfg.benchmark.to_string(),
        config_hash: cfg.hash(),
        initial_state: x0,
        k_hat: model.nets().len(),
        identified_switches: true_switches
            .iter()
            .map(|&t1| identified_switch(interior(&endpoints), t1))
            .collect(),
        endpoints,
        true_switches,
        test_mse: mse(pred, &p.reference)?,
        final_relative_error: final_rel,
        max_relative_error: rel.iter().copied().reduce(f64::max),
        max_abs_error,
    };
    Ok((p, summary))
}

/// MSE of the rollout from the validation trajectory's first observed state
/// against its observed states.
pub fn validation_mse(model: &PiecewiseModel, store: &TrajectoryStore) -> Result<f64, ExperimentError> {
    let observed = store.trajectory(store.trajectory_count() - 1);
    let rollout = model.rollout(observed.x0(), store.grid())?;
    Ok(mse(&rollout.trajectory, &observed)?)
}

/// Writes `prediction.csv` and `metrics.json`, plus a pointwise error table
/// for the heat benchmark.
pub fn write_evaluation(dir: &Path, p: &Prediction, summary: &EvalSummary) -> Result<(), ExperimentError> {
    create_dir(dir)?;
    write_with(&dir.join(PREDICTION_FILE), |w| {
        write_prediction_csv(w, &p.grid, &p.rollout.trajectory, &p.reference)
    })?;
    if summary.benchmark == BenchmarkName::Heat.as_str() {
        write_with(&dir.join(HEAT_ERROR_FILE), |w| {
            write_heat_error_csv(w, &p.grid, &p.rollout.trajectory, &p.reference)
        })?;
    }
    write_text(&dir.join(METRICS_FILE), &to_json(summary))
}

/// Splits `data` by the model's intervals, using the same time rule as the rollout.
pub fn partition_by_endpoints(data: &PairDataset, model: &PiecewiseModel) -> Vec<PairDataset> {
    (0..model.nets().len())
        .map(|i| data.filter(|p| model.interval_of(p.t) == i))
        .collect()
}

/// Box on which the Lipschitz constants and the field gap are estimated.
#[derive(Debug, Clone, PartialEq)]
pub enum MuDomain {
    /// Bounding box of every observed state.
    DataBox,
    /// The benchmark's initial-state sampling box.
    Sampling,
    Custom(BoxDomain),
}

/// Which one-step error enters the bound as `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonSource {
    /// Mismatch against the exact flow of the regime each interval is
    /// attributed to, over all training and validation inputs.
    #[default]
    FlowMap,
    /// Mismatch against the observed next state over the validation pairs.
    Validation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub benchmark: String,
    pub config_hash: String,
    pub l1: f64,
    pub l2: f64,
    pub mu: f64,
    pub eta: f64,
    pub eps: f64,
    pub eps_source: EpsilonSource,
    pub eps_flow_map: f64,
    pub eps_validation: f64,
    pub delta: f64,
    pub t1: f64,
    pub t_breve: f64,
    pub constants_domain: BoxDomain,
    pub rows: usize,
    pub hull_violations: usize,
    pub exceedances: usize,
    pub dominated: bool,
    /// Largest `empirical_err / bound` over in-hull rows.
    pub max_ratio: f64,
}

/// Evaluates the a-priori bound along the rollout from `x0` (or the test
/// state) for a benchmark with exactly one switch.
pub fn bound_check(
    cfg: &ExperimentConfig,
    model: &PiecewiseModel,
    store: Arc<TrajectoryStore>,
    x0: Option<&[f64]>,
    domain: &MuDomain,
    eps_source: EpsilonSource,
) -> Result<(BoundReport, BoundSummary), ExperimentError> {
    let bench = cfg.benchmark();
    let fields = bench.system.fields();
    let switches = bench.system.schedule().switch_times();
    if fields.len() != 2 || switches.len() != 1 {
        return Err(ExperimentError::Config(format!(
            "the error bound needs a system with exactly one switch, {} has {}",
            bench.name,
            switches.len()
        )));
    }
    let (f1, f2, t1) = (&fields[0], &fields[1], switches[0]);
    let t_breve = identified_switch(interior(model.endpoints()), t1).unwrap_or(model.t_max());

    let (train, validation) = build_datasets(Arc::clone(&store))?;
    let all_states = (0..store.trajectory_count())
        .flat_map(|n| (0..store.grid().len()).map(move |j| (n, j)))
        .map(|(n, j)| store.state(n, j));
    let constants_domain = match domain {
        MuDomain::DataBox => BoxDomain::bounding(all_states).expect("store is never empty"),
        MuDomain::Sampling => bench.domain.clone(),
        MuDomain::Custom(b) => b.clone(),
    };
    constants_domain
        .validate()
        .map_err(|e| ExperimentError::Config(format!("constants domain: {e}")))?;
    if constants_domain.dim() != bench.dim() {
        return Err(ExperimentError::Config(format!(
            "constants domain has dimension {}, state dimension is {}",
            constants_domain.dim(),
            bench.dim()
        )));
    }
    let l1 = lipschitz_on_box(f1, &constants_domain, CONSTANT_GRID)?;
    let l2 = lipschitz_on_box(f2, &constants_domain, CONSTANT_GRID)?;
    let mu = sup_field_difference(f1, f2, &constants_domain, CONSTANT_GRID)?;
    let eps_flow_map = one_step_epsilon(
        model,
        [f1, f2],
        t_breve,
        cfg.delta,
        &Integrator::default(),
        train.iter().chain(validation.iter()).map(|p| (p.t, p.input)),
    )?;
    let eps_validation = observed_epsilon(model, validation.iter().map(|p| (p.t, p.input, p.output)))?;
    let eps = match eps_source {
        EpsilonSource::FlowMap => eps_flow_map,
        EpsilonSource::Validation => eps_validation,
    };
    let hulls: Vec<BoxDomain> = partition_by_endpoints(&train, model)
        .iter()
        .map(|part| {
            BoxDomain::bounding(part.iter().map(|p| p.input))
                .unwrap_or_else(|| BoxDomain { lower: vec![f64::INFINITY; bench.dim()], upper: vec![f64::NEG_INFINITY; bench.dim()] })
        })
        .collect();

    let inputs = BoundInputs {
        l1,
        l2,
        mu,
        eta: (t_breve - t1).abs(),
        eps,
        delta: cfg.delta,
        t1,
        t_breve,
    };
    let x0 = x0.map(<[f64]>::to_vec).unwrap_or_else(|| bench.test_initial_state());
    let p = predict(cfg, model, &x0)?;
    let report = check_bound(&inputs, &p.grid, &p.rollout, &p.reference, &hulls)?;
    let max_ratio = report
        .rows
        .iter()
        .filter(|r| r.in_hull && r.bound > 0.0)
        .map(|r| r.empirical_err / r.bound)
        .fold(0.0, f64::max);
    let summary = BoundSummary {
        benchmark: cfg.benchmark.to_string(),
        config_hash: cfg.hash(),
        l1,
        l2,
        mu,
        eta: inputs.eta,
        eps,
        eps_source,
        eps_flow_map,
        eps_validation,
        delta: cfg.delta,
        t1,
        t_breve,
        constants_domain,
        rows: report.rows.len(),
        hull_violations: report.hull_violations(),
        exceedances: report.exceedances().len(),
        dominated: report.dominated(),
        max_ratio,
    };
    Ok((report, summary))
}

/// Writes `bound.csv`, `hull_violations.csv` and `bound.json`.
pub fn write_bound(dir: &Path, report: &BoundReport, summary: &BoundSummary) -> Result<(), ExperimentError> {
    create_dir(dir)?;
    write_with(&dir.join(BOUND_FILE), |w| report.write_csv(w))?;
    write_with(&dir.join(HULL_VIOLATIONS_FILE), |w| report.write_violations_csv(w))?;
    write_text(&dir.join(BOUND_SUMMARY_FILE), &to_json(summary))
}
