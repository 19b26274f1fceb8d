use serde::{Deserialize, Serialize};

use super::{DynamicsError, VectorField};

/// Piecewise-constant switching signal on `(0, t_max]`.
///
/// Regimes are left-open and right-closed: regime `k` (0-based) is active on
/// `(T_k, T_{k+1}]` with `T_0 = 0`, and regime 0 also owns `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSchedule {
    switch_times: Vec<f64>,
    t_max: f64,
}

impl SignalSchedule {
    pub fn new(switch_times: Vec<f64>, t_max: f64) -> Result<Self, DynamicsError> {
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(DynamicsError::InvalidSchedule(format!(
                "t_max must be positive and finite, got {t_max}"
            )));
        }
        let mut prev = 0.0;
        for &t in &switch_times {
            if !(t.is_finite() && t > prev && t < t_max) {
                return Err(DynamicsError::InvalidSchedule(format!(
                    "switch times must satisfy 0 < T_1 < ... < t_max = {t_max}, got {switch_times:?}"
                )));
            }
            prev = t;
        }
        Ok(Self {
            switch_times,
            t_max,
        })
    }

    pub fn single(t_max: f64) -> Result<Self, DynamicsError> {
        Self::new(Vec::new(), t_max)
    }

    pub fn switch_times(&self) -> &[f64] {
        &self.switch_times
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn regime_count(&self) -> usize {
        self.switch_times.len() + 1
    }

    /// 0-based active regime `sigma(t) - 1`.
    pub fn regime_at(&self, t: f64) -> usize {
        self.switch_times.partition_point(|&s| s < t)
    }
}

/// A switched system `x' = f^(sigma(t))(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchedSystem {
    fields: Vec<VectorField>,
    schedule: SignalSchedule,
}

impl SwitchedSystem {
    pub fn new(fields: Vec<VectorField>, schedule: SignalSchedule) -> Result<Self, DynamicsError> {
        if fields.len() != schedule.regime_count() {
            return Err(DynamicsError::InvalidSystem(format!(
                "{} fields for {} regimes",
                fields.len(),
                schedule.regime_count()
            )));
        }
        let dim = fields[0].dim();
        for f in &fields {
            f.validate()?;
            if f.dim() != dim {
                return Err(DynamicsError::InvalidSystem(
                    "all fields must share the state dimension".into(),
                ));
            }
        }
        Ok(Self { fields, schedule })
    }

    pub fn autonomous(field: VectorField, t_max: f64) -> Result<Self, DynamicsError> {
        Self::new(vec![field], SignalSchedule::single(t_max)?)
    }

    pub fn dim(&self) -> usize {
        self.fields[0].dim()
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn schedule(&self) -> &SignalSchedule {
        &self.schedule
    }

    pub fn field_at(&self, t: f64) -> &VectorField {
        &self.fields[self.schedule.regime_at(t)]
    }

    /// Same fields, different switching instants (e.g. the auxiliary system
    /// that switches at an identified endpoint instead of the true time).
    pub fn with_schedule(&self, schedule: SignalSchedule) -> Result<Self, DynamicsError> {
        Self::new(self.fields.clone(), schedule)
    }
}

/// Uniform observation grid `t_j = j * t_max / (J - 1)`, `j = 0..J`.
///
/// Times are computed as `(j * t_max) / (J - 1)` rather than by accumulating
/// `delta`, so grid points that coincide with dyadic split points compare exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_max: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, steps: usize) -> Result<Self, DynamicsError> {
        if steps < 2 || !(t_max.is_finite() && t_max > 0.0) {
            return Err(DynamicsError::InvalidGrid(format!(
                "need J >= 2 and t_max > 0, got J = {steps}, t_max = {t_max}"
            )));
        }
        Ok(Self { t_max, steps })
    }

    /// Grid from `(delta, J)`; requires `(J - 1) delta = t_max` to 1e-12 relative.
    pub fn from_delta(t_max: f64, delta: f64, steps: usize) -> Result<Self, DynamicsError> {
        let grid = Self::new(t_max, steps)?;
        if !(delta > 0.0) || ((steps - 1) as f64 * delta - t_max).abs() > 1e-12 * t_max {
            return Err(DynamicsError::InvalidGrid(format!(
                "(J - 1) * delta = {} does not match t_max = {t_max}",
                (steps - 1) as f64 * delta
            )));
        }
        Ok(grid)
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// Number of grid points `J`.
    pub fn len(&self) -> usize {
        self.steps
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn delta(&self) -> f64 {
        self.t_max / (self.steps - 1) as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        (j as f64 * self.t_max) / (self.steps - 1) as f64
    }
}
