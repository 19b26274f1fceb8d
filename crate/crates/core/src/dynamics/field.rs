use serde::{Deserialize, Serialize};

use super::DynamicsError;
use crate::linalg::Matrix;

/// Width of the Gaussian source bump of the heat benchmark, `exp(-(x-1)^2 / 0.25)`.
const HEAT_SOURCE_WIDTH: f64 = 0.25;

/// One governing vector field `f^(k)` of a switched system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorField {
    /// `x1' = x2`, `x2' = -k x1 - nu x2 + f`.
    Oscillator {
        stiffness: f64,
        damping: f64,
        forcing: f64,
    },
    /// `x1' = x2`, `x2' = -a x2 - g sin(x1) + b`.
    Pendulum {
        damping: f64,
        gravity: f64,
        forcing: f64,
    },
    /// Centered-difference semi-discretization of `u_t = kappa u_xx + q(x)` on
    /// `[0, 1]` with homogeneous Dirichlet data. The state holds every node,
    /// boundaries included; boundary nodes are pinned to zero.
    HeatSemidiscrete {
        diffusivity: f64,
        grid_nodes: usize,
        source_amplitude: f64,
    },
    /// `x' = A x + b` with `A` row-major.
    Affine { matrix: Vec<f64>, offset: Vec<f64> },
}

impl VectorField {
    pub fn zero(dim: usize) -> Self {
        VectorField::Affine {
            matrix: vec![0.0; dim * dim],
            offset: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            VectorField::Oscillator { .. } | VectorField::Pendulum { .. } => 2,
            VectorField::HeatSemidiscrete { grid_nodes, .. } => *grid_nodes,
            VectorField::Affine { offset, .. } => offset.len(),
        }
    }

    pub(crate) fn validate(&self) -> Result<(), DynamicsError> {
        match self {
            VectorField::HeatSemidiscrete { grid_nodes, .. } if *grid_nodes < 3 => {
                Err(DynamicsError::InvalidField(format!(
                    "heat grid needs at least 3 nodes, got {grid_nodes}"
                )))
            }
            VectorField::Affine { matrix, offset } if matrix.len() != offset.len() * offset.len() => {
                Err(DynamicsError::InvalidField(format!(
                    "affine matrix has {} entries for dimension {}",
                    matrix.len(),
                    offset.len()
                )))
            }
            _ => Ok(()),
        }
    }

    /// Checked evaluation of `f(x)`.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>, DynamicsError> {
        if x.len() != self.dim() {
            return Err(DynamicsError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let mut out = vec![0.0; x.len()];
        self.eval_into(x, &mut out);
        Ok(out)
    }

    /// Unchecked evaluation; `x` and `out` must have length `dim()`.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match *self {
            VectorField::Oscillator {
                stiffness,
                damping,
                forcing,
            } => {
                out[0] = x[1];
                out[1] = -stiffness * x[0] - damping * x[1] + forcing;
            }
            VectorField::Pendulum {
                damping,
                gravity,
                forcing,
            } => {
                out[0] = x[1];
                out[1] = -damping * x[1] - gravity * x[0].sin() + forcing;
            }
            VectorField::HeatSemidiscrete {
                diffusivity,
                grid_nodes,
                source_amplitude,
            } => {
                let n = grid_nodes;
                let h = 1.0 / (n - 1) as f64;
                let coef = diffusivity / (h * h);
                out[0] = 0.0;
                out[n - 1] = 0.0;
                for i in 1..n - 1 {
                    let left = if i == 1 { 0.0 } else { x[i - 1] };
                    let right = if i == n - 2 { 0.0 } else { x[i + 1] };
                    out[i] = coef * (right - 2.0 * x[i] + left)
                        + heat_source(source_amplitude, i as f64 * h);
                }
            }
            VectorField::Affine {
                ref matrix,
                ref offset,
            } => {
                let d = offset.len();
                for (r, o) in out.iter_mut().enumerate() {
                    let row = &matrix[r * d..(r + 1) * d];
                    *o = offset[r] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
    }

    /// Jacobian `df/dx` at `x`.
    pub fn jacobian(&self, x: &[f64]) -> Matrix {
        let d = self.dim();
        let mut j = Matrix::zeros(d, d);
        match *self {
            VectorField::Oscillator {
                stiffness, damping, ..
            } => {
                j[(0, 1)] = 1.0;
                j[(1, 0)] = -stiffness;
                j[(1, 1)] = -damping;
            }
            VectorField::Pendulum {
                damping, gravity, ..
            } => {
                j[(0, 1)] = 1.0;
                j[(1, 0)] = -gravity * x[0].cos();
                j[(1, 1)] = -damping;
            }
            VectorField::HeatSemidiscrete {
                diffusivity,
                grid_nodes,
                ..
            } => {
                let h = 1.0 / (grid_nodes - 1) as f64;
                let coef = diffusivity / (h * h);
                for i in 1..grid_nodes - 1 {
                    j[(i, i)] = -2.0 * coef;
                    if i > 1 {
                        j[(i, i - 1)] = coef;
                    }
                    if i < grid_nodes - 2 {
                        j[(i, i + 1)] = coef;
                    }
                }
            }
            VectorField::Affine { ref matrix, .. } => {
                j = Matrix::from_row_major(d, d, matrix.clone());
            }
        }
        j
    }

    /// True when `f(x) - A x` is constant, so the Jacobian does not depend on `x`.
    pub fn is_affine(&self) -> bool {
        !matches!(self, VectorField::Pendulum { .. })
    }
}

pub fn heat_source(amplitude: f64, x: f64) -> f64 {
    amplitude * (-(x - 1.0).powi(2) / HEAT_SOURCE_WIDTH).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oscillator_hand_evaluation() {
        let f = VectorField::Oscillator {
            stiffness: 1.0,
            damping: 0.1,
            forcing: 2.0,
        };
        let v = f.evaluate(&[2.0, 1.0]).unwrap();
        assert_eq!(v[0], 1.0);
        assert!((v[1] - (-0.1)).abs() < 1e-15);
    }

    #[test]
    fn unforced_oscillator_at_rest() {
        let f = VectorField::Oscillator {
            stiffness: 3.0,
            damping: 0.7,
            forcing: 0.0,
        };
        assert_eq!(f.evaluate(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn pendulum_hand_evaluation() {
        let f = VectorField::Pendulum {
            damping: 0.15,
            gravity: 9.8,
            forcing: 0.0,
        };
        let v = f.evaluate(&[0.0, -2.0]).unwrap();
        assert_eq!(v[0], -2.0);
        assert!((v[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let f = VectorField::zero(3);
        assert!(matches!(
            f.evaluate(&[1.0, 2.0]),
            Err(DynamicsError::DimensionMismatch {
                expected: 3,
                found: 2
            })
        ));
    }

    #[test]
    fn heat_boundaries_are_pinned() {
        let f = VectorField::HeatSemidiscrete {
            diffusivity: 0.2,
            grid_nodes: 21,
            source_amplitude: 20.0,
        };
        // Nonzero boundary values must be ignored by the stencil.
        let mut x = vec![0.0; 21];
        x[0] = 5.0;
        x[20] = -5.0;
        let v = f.evaluate(&x).unwrap();
        assert_eq!(v[0], 0.0);
        assert_eq!(v[20], 0.0);
        assert!((v[1] - heat_source(20.0, 0.05)).abs() < 1e-12);
        assert!((v[19] - heat_source(20.0, 0.95)).abs() < 1e-12);
    }

    #[test]
    fn heat_interior_stencil() {
        let n = 21;
        let f = VectorField::HeatSemidiscrete {
            diffusivity: 0.2,
            grid_nodes: n,
            source_amplitude: 0.0,
        };
        // u = x(1-x) has u_xx = -2 exactly and the centered stencil is exact for quadratics.
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let s = i as f64 / (n - 1) as f64;
                s * (1.0 - s)
            })
            .collect();
        let v = f.evaluate(&x).unwrap();
        for vi in &v[1..n - 1] {
            assert!((vi - (-0.4)).abs() < 1e-10, "{vi}");
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let fields = [
            VectorField::Oscillator {
                stiffness: 1.0,
                damping: 0.5,
                forcing: 10.0,
            },
            VectorField::Pendulum {
                damping: 0.15,
                gravity: 9.8,
                forcing: 2.0,
            },
            VectorField::HeatSemidiscrete {
                diffusivity: 0.2,
                grid_nodes: 6,
                source_amplitude: 3.0,
            },
        ];
        for f in &fields {
            let d = f.dim();
            let x: Vec<f64> = (0..d).map(|i| 0.3 + 0.1 * i as f64).collect();
            let jac = f.jacobian(&x);
            let h = 1e-6;
            for c in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[c] += h;
                xm[c] -= h;
                let fp = f.evaluate(&xp).unwrap();
                let fm = f.evaluate(&xm).unwrap();
                for r in 0..d {
                    let fd = (fp[r] - fm[r]) / (2.0 * h);
                    assert!((fd - jac[(r, c)]).abs() < 1e-5, "{f:?} ({r},{c})");
                }
            }
        }
    }
}
