use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{DynamicsError, Trajectory};
use crate::rng;

/// Axis-aligned box `[lower_i, upper_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, DynamicsError> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self, DynamicsError> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    /// Bounding box of a set of points; `None` when the set is empty.
    pub fn bounding<'a>(points: impl IntoIterator<Item = &'a [f64]>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut lower = first.to_vec();
        let mut upper = first.to_vec();
        for p in it {
            for (i, &v) in p.iter().enumerate() {
                lower[i] = lower[i].min(v);
                upper[i] = upper[i].max(v);
            }
        }
        Some(Self { lower, upper })
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if self.lower.len() != self.upper.len() || self.lower.is_empty() {
            return Err(DynamicsError::InvalidDomain("bound vectors differ in length".into()));
        }
        for (lo, hi) in self.lower.iter().zip(&self.upper) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(DynamicsError::InvalidDomain(format!(
                    "bad bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

/// `n` i.i.d. uniform points in `domain`, reproducible from `seed`.
pub fn sample_initial_states(
    domain: &BoxDomain,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, DynamicsError> {
    domain.validate()?;
    if n == 0 {
        return Err(DynamicsError::EmptySample);
    }
    let mut r = rng::seeded(seed);
    Ok((0..n)
        .map(|_| {
            domain
                .lower
                .iter()
                .zip(&domain.upper)
                .map(|(lo, hi)| {
                    let u: f64 = r.random();
                    lo + (hi - lo) * u
                })
                .collect()
        })
        .collect())
}

/// Multiplicative measurement noise `y_j = x(t_j) (1 + xi_j)`, with one
/// `xi_j ~ U[0, eta]` per observed state (shared by its components).
///
/// `xi_j = eta * u_j` with `u_j ~ U[0, 1)`, so equal seeds give noise
/// realizations that scale exactly with `eta`.
pub fn add_noise(traj: &Trajectory, eta: f64, seed: u64) -> Result<Trajectory, DynamicsError> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(DynamicsError::InvalidNoise(eta));
    }
    let mut out = traj.clone();
    if eta == 0.0 {
        return Ok(out);
    }
    let dim = traj.dim();
    let mut r = rng::seeded(seed);
    for state in out.as_flat_mut().chunks_exact_mut(dim) {
        let u: f64 = r.random();
        let scale = 1.0 + eta * u;
        state.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(out)
}
