use std::io::Write;

use super::{EvalError, PiecewiseModel, Rollout};
use crate::dynamics::{BoxDomain, Integrator, SwitchedSystem, TimeGrid, Trajectory, VectorField};
use crate::linalg::squared_distance;
use crate::textio;

/// Constants entering the a-priori prediction error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub l1: f64,
    pub l2: f64,
    pub mu: f64,
    pub eta: f64,
    pub eps: f64,
    pub delta: f64,
    pub t1: f64,
    pub t_breve: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundBranch {
    PreT1,
    T1ToTbreve,
    PostTbreve,
    /// Identified switch earlier than the true one: `t <= t_breve`.
    PreTbreve,
    TbreveToT1,
    PostT1,
}

impl BoundBranch {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::PreT1 => "pre-T1",
            Self::T1ToTbreve => "T1-to-tbreve",
            Self::PostTbreve => "post-tbreve",
            Self::PreTbreve => "pre-tbreve",
            Self::TbreveToT1 => "tbreve-to-T1",
            Self::PostT1 => "post-T1",
        }
    }
}

impl BoundInputs {
    fn validate(&self) -> Result<(), EvalError> {
        let named = [
            ("l1", self.l1),
            ("l2", self.l2),
            ("mu", self.mu),
            ("eta", self.eta),
            ("eps", self.eps),
            ("t1", self.t1),
            ("t_breve", self.t_breve),
        ];
        for (name, v) in named {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(EvalError::InvalidBound(format!("{name} = {v} must be finite and non-negative")));
            }
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(EvalError::InvalidBound("delta must be positive".into()));
        }
        Ok(())
    }

    /// Accumulated one-step error after `s / delta` steps with per-step
    /// amplification `exp(l * delta)`, in units of `eps`; `s / delta` at `l = 0`.
    fn geometric(&self, l: f64, s: f64) -> f64 {
        if l == 0.0 {
            s / self.delta
        } else {
            (l * s).exp_m1() / (l * self.delta).exp_m1()
        }
    }

    /// Bound value and branch at time `t`.
    pub fn at(&self, t: f64) -> (f64, BoundBranch) {
        let lmax = self.l1.max(self.l2);
        let (tb, t1, eps) = (self.t_breve, self.t1, self.eps);
        let after_breve = |t: f64| {
            self.geometric(self.l2, t - tb) * eps + (self.l2 * (t - tb)).exp() * self.geometric(self.l1, tb) * eps
        };
        if tb >= t1 {
            if t <= t1 {
                (self.geometric(self.l1, t) * eps, BoundBranch::PreT1)
            } else if t <= tb {
                let switch = self.mu * (t - t1) * (lmax * (t - t1)).exp();
                (switch + self.geometric(self.l1, t) * eps, BoundBranch::T1ToTbreve)
            } else {
                let switch = self.mu * self.eta * (self.l2 * (t - tb) + lmax * self.eta).exp();
                (switch + after_breve(t), BoundBranch::PostTbreve)
            }
        } else if t <= tb {
            (self.geometric(self.l1, t) * eps, BoundBranch::PreTbreve)
        } else if t <= t1 {
            let switch = self.mu * (t - tb) * (lmax * (t - tb)).exp();
            (switch + after_breve(t), BoundBranch::TbreveToT1)
        } else {
            let switch = self.mu * self.eta * (self.l2 * (t - t1) + lmax * self.eta).exp();
            (switch + after_breve(t), BoundBranch::PostT1)
        }
    }
}

/// Bound values at `times`.
pub fn rollout_bound(inputs: &BoundInputs, times: &[f64]) -> Result<Vec<(f64, BoundBranch)>, EvalError> {
    inputs.validate()?;
    Ok(times.iter().map(|&t| inputs.at(t)).collect())
}

/// Largest `||N_i(y) - Phi_k(y)||` over `samples` of `(t_j, y)`, where `N_i`
/// is the model's network for `t_j` and `Phi_k` is the exact one-step flow
/// of `fields[0]` on intervals ending at or before `t_breve` and of
/// `fields[1]` after it.
pub fn one_step_epsilon<'a>(
    model: &PiecewiseModel,
    fields: [&VectorField; 2],
    t_breve: f64,
    delta: f64,
    integrator: &Integrator,
    samples: impl IntoIterator<Item = (f64, &'a [f64])>,
) -> Result<f64, EvalError> {
    let flows = [
        SwitchedSystem::autonomous(fields[0].clone(), delta)?,
        SwitchedSystem::autonomous(fields[1].clone(), delta)?,
    ];
    let ends = model.endpoints();
    let mut worst = 0.0f64;
    let mut phi = Vec::new();
    for (t, y) in samples {
        let i = model.interval_of(t);
        let regime = usize::from(ends[i + 1] > t_breve);
        phi.clear();
        phi.extend_from_slice(y);
        integrator.step(&flows[regime], &mut phi, 0.0, delta);
        let out = model.nets()[i]
            .forward(y)
            .map_err(|_| EvalError::NonFinite { j: 0 })?;
        worst = worst.max(squared_distance(&out, &phi).sqrt());
    }
    Ok(worst)
}

/// Largest one-step error `||N_i(y_in) - y_out||` over observed `(t_j, y_in, y_out)` triples.
pub fn observed_epsilon<'a>(
    model: &PiecewiseModel,
    pairs: impl IntoIterator<Item = (f64, &'a [f64], &'a [f64])>,
) -> Result<f64, EvalError> {
    let mut worst = 0.0f64;
    for (t, input, output) in pairs {
        let out = model.nets()[model.interval_of(t)]
            .forward(input)
            .map_err(|_| EvalError::NonFinite { j: 0 })?;
        worst = worst.max(squared_distance(&out, output).sqrt());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub j: usize,
    pub t: f64,
    pub empirical_err: f64,
    pub bound: f64,
    pub branch: BoundBranch,
    /// Both ends of the step into `t_j` lie in the box of the interval used.
    pub in_hull: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub rows: Vec<BoundRow>,
}

impl BoundReport {
    pub fn hull_violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.in_hull).count()
    }

    /// Rows inside the hull whose error exceeds the bound.
    pub fn exceedances(&self) -> Vec<&BoundRow> {
        self.rows
            .iter()
            .filter(|r| r.in_hull && r.empirical_err > r.bound + 1e-12 * r.bound.max(1.0))
            .collect()
    }

    pub fn dominated(&self) -> bool {
        self.exceedances().is_empty()
    }

    /// `j,t,empirical_err,bound,branch`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "j,t,empirical_err,bound,branch")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.j,
                textio::real(r.t),
                textio::real(r.empirical_err),
                textio::real(r.bound),
                r.branch.as_str()
            )?;
        }
        Ok(())
    }

    /// `j,t` of every step outside the hull.
    pub fn write_violations_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "j,t")?;
        for r in self.rows.iter().filter(|r| !r.in_hull) {
            writeln!(w, "{},{}", r.j, textio::real(r.t))?;
        }
        Ok(())
    }
}

/// Compares the rollout error against the bound at every grid point.
///
/// `hulls[i]` approximates the convex hull of interval `i`'s training inputs.
pub fn check_bound(
    inputs: &BoundInputs,
    grid: &TimeGrid,
    rollout: &Rollout,
    reference: &Trajectory,
    hulls: &[BoxDomain],
) -> Result<BoundReport, EvalError> {
    inputs.validate()?;
    let pred = &rollout.trajectory;
    if pred.len() != reference.len() || pred.len() != grid.len() {
        return Err(EvalError::Length {
            left: pred.len(),
            right: reference.len(),
        });
    }
    let rows = (0..grid.len())
        .map(|j| {
            let t = grid.time(j);
            let (bound, branch) = inputs.at(t);
            let in_hull = j == 0 || {
                let i = rollout.intervals[j - 1];
                hulls
                    .get(i)
                    .is_some_and(|h| h.contains(pred.state(j - 1)) && h.contains(pred.state(j)))
            };
            BoundRow {
                j,
                t,
                empirical_err: squared_distance(pred.state(j), reference.state(j)).sqrt(),
                bound,
                branch,
                in_hull,
            }
        })
        .collect();
    Ok(BoundReport { inputs: *inputs, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs() -> BoundInputs {
        BoundInputs {
            l1: 1.05,
            l2: 1.28,
            mu: 9.2,
            eta: 0.1,
            eps: 1e-3,
            delta: 0.05,
            t1: 27.6,
            t_breve: 27.7,
        }
    }

    #[test]
    fn zero_errors_give_zero_bound() {
        let b = BoundInputs { eps: 0.0, mu: 0.0, ..inputs() };
        let times: Vec<f64> = (0..=800).map(|j| j as f64 * 0.05).collect();
        assert!(rollout_bound(&b, &times).unwrap().iter().all(|(v, _)| *v == 0.0));
        let mirror = BoundInputs { t_breve: 27.5, ..b };
        assert!(rollout_bound(&mirror, &times).unwrap().iter().all(|(v, _)| *v == 0.0));
    }

    #[test]
    fn zero_lipschitz_limit() {
        let b = BoundInputs { l1: 0.0, ..inputs() };
        let (v, branch) = b.at(0.5);
        assert_eq!(branch, BoundBranch::PreT1);
        assert!((v - 10.0 * b.eps).abs() < 1e-15);
        let tiny = BoundInputs { l1: 1e-12, ..inputs() };
        assert!((tiny.at(0.5).0 - 10.0 * b.eps).abs() < 1e-12);
    }

    #[test]
    fn branches_and_labels() {
        let b = inputs();
        assert_eq!(b.at(27.6).1, BoundBranch::PreT1);
        assert_eq!(b.at(27.65).1, BoundBranch::T1ToTbreve);
        assert_eq!(b.at(30.0).1, BoundBranch::PostTbreve);
        let m = BoundInputs { t_breve: 27.5, ..b };
        assert_eq!(m.at(27.5).1, BoundBranch::PreTbreve);
        assert_eq!(m.at(27.55).1, BoundBranch::TbreveToT1);
        assert_eq!(m.at(27.65).1, BoundBranch::PostT1);
        assert_eq!(BoundBranch::PostT1.as_str(), "post-T1");
    }

    #[test]
    fn geometric_term_counts_steps() {
        // With l1 = ln(2)/delta each step doubles: sum_{k<n} 2^k = 2^n - 1.
        let b = BoundInputs { l1: std::f64::consts::LN_2 / 0.05, eps: 1.0, ..inputs() };
        assert!((b.at(0.25).0 - 31.0).abs() < 1e-9);
    }

    #[test]
    fn bound_is_monotone_within_branches() {
        for tb in [27.5, 27.7] {
            let b = BoundInputs { t_breve: tb, ..inputs() };
            let times: Vec<f64> = (0..=800).map(|j| j as f64 * 0.05).collect();
            let vals = rollout_bound(&b, &times).unwrap();
            for w in vals.windows(2) {
                if w[0].1 == w[1].1 {
                    assert!(w[1].0 >= w[0].0);
                }
            }
        }
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(rollout_bound(&BoundInputs { eps: -1.0, ..inputs() }, &[0.0]).is_err());
        assert!(rollout_bound(&BoundInputs { delta: 0.0, ..inputs() }, &[0.0]).is_err());
    }
}
