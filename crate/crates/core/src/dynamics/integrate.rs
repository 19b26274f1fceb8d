use serde::{Deserialize, Serialize};

use super::{DynamicsError, SwitchedSystem, TimeGrid, VectorField};

/// States observed on a uniform grid; `state(0)` is the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    delta: f64,
    states: Vec<f64>,
}

impl Trajectory {
    /// `states` is row-major, one row of length `dim` per grid point.
    pub fn from_flat(dim: usize, delta: f64, states: Vec<f64>) -> Result<Self, DynamicsError> {
        if dim == 0 || states.len() % dim != 0 || states.len() / dim < 2 {
            return Err(DynamicsError::InvalidTrajectory(format!(
                "{} values do not form J >= 2 states of dimension {dim}",
                states.len()
            )));
        }
        Ok(Self { dim, delta, states })
    }

    pub fn from_states(delta: f64, states: &[Vec<f64>]) -> Result<Self, DynamicsError> {
        let dim = states.first().map_or(0, Vec::len);
        if states.iter().any(|s| s.len() != dim) {
            return Err(DynamicsError::InvalidTrajectory("ragged states".into()));
        }
        Self::from_flat(dim, delta, states.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Number of grid points `J`.
    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn x0(&self) -> &[f64] {
        self.state(0)
    }

    pub fn state(&self, j: usize) -> &[f64] {
        &self.states[j * self.dim..(j + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.states
    }

    pub(crate) fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.states
    }
}

/// Fixed-substep classical RK4 that never steps across a switching instant.
///
/// Every observation step `(t_j, t_{j+1}]` is cut at each switch time in its
/// interior; each piece is advanced with `substeps` RK4 steps of the field
/// active on that piece.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integrator {
    pub substeps: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self { substeps: 20 }
    }
}

/// Switch times closer than this (relative to `t_max`) to a grid point are
/// treated as lying on it.
const SWITCH_SNAP: f64 = 1e-12;

impl Integrator {
    pub fn new(substeps: usize) -> Self {
        assert!(substeps >= 1, "at least one substep is required");
        Self { substeps }
    }

    /// Integrates `system` from `x0` over `J` grid points spaced `delta`.
    pub fn integrate(
        &self,
        system: &SwitchedSystem,
        x0: &[f64],
        delta: f64,
        steps: usize,
    ) -> Result<Trajectory, DynamicsError> {
        let grid = TimeGrid::from_delta(system.schedule().t_max(), delta, steps)?;
        self.integrate_on(system, x0, &grid)
    }

    pub fn integrate_on(
        &self,
        system: &SwitchedSystem,
        x0: &[f64],
        grid: &TimeGrid,
    ) -> Result<Trajectory, DynamicsError> {
        let d = system.dim();
        if x0.len() != d {
            return Err(DynamicsError::DimensionMismatch {
                expected: d,
                found: x0.len(),
            });
        }
        let mut states = Vec::with_capacity(grid.len() * d);
        states.extend_from_slice(x0);
        let mut x = x0.to_vec();
        let mut ws = Rk4Workspace::new(d);
        for j in 0..grid.len() - 1 {
            self.advance(system, &mut x, grid.time(j), grid.time(j + 1), &mut ws);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(DynamicsError::Diverged {
                    index: j + 1,
                    time: grid.time(j + 1),
                });
            }
            states.extend_from_slice(&x);
        }
        Trajectory::from_flat(d, grid.delta(), states)
    }

    /// One observation step from `t_start` to `t_end`, split at switch times.
    pub fn step(&self, system: &SwitchedSystem, x: &mut [f64], t_start: f64, t_end: f64) {
        let mut ws = Rk4Workspace::new(x.len());
        self.advance(system, x, t_start, t_end, &mut ws);
    }

    fn advance(
        &self,
        system: &SwitchedSystem,
        x: &mut [f64],
        t_start: f64,
        t_end: f64,
        ws: &mut Rk4Workspace,
    ) {
        let snap = SWITCH_SNAP * system.schedule().t_max();
        let mut lo = t_start;
        for &ts in system.schedule().switch_times() {
            if ts > lo + snap && ts < t_end - snap {
                self.advance_piece(system.field_at(0.5 * (lo + ts)), x, ts - lo, ws);
                lo = ts;
            }
        }
        self.advance_piece(system.field_at(0.5 * (lo + t_end)), x, t_end - lo, ws);
    }

    fn advance_piece(&self, field: &VectorField, x: &mut [f64], span: f64, ws: &mut Rk4Workspace) {
        let h = span / self.substeps as f64;
        for _ in 0..self.substeps {
            rk4_step(field, x, h, ws);
        }
    }
}

struct Rk4Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Workspace {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }
}

fn rk4_step(field: &VectorField, y: &mut [f64], h: f64, ws: &mut Rk4Workspace) {
    let n = y.len();
    field.eval_into(y, &mut ws.k1);
    for i in 0..n {
        ws.tmp[i] = y[i] + 0.5 * h * ws.k1[i];
    }
    field.eval_into(&ws.tmp, &mut ws.k2);
    for i in 0..n {
        ws.tmp[i] = y[i] + 0.5 * h * ws.k2[i];
    }
    field.eval_into(&ws.tmp, &mut ws.k3);
    for i in 0..n {
        ws.tmp[i] = y[i] + h * ws.k3[i];
    }
    field.eval_into(&ws.tmp, &mut ws.k4);
    for i in 0..n {
        y[i] += h / 6.0 * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
    }
}
