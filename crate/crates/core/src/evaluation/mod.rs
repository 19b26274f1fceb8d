//! Piecewise rollout, accuracy metrics and the a-priori error bound.

mod bound;
mod constants;
mod metrics;
mod rollout;

pub use bound::{
    check_bound, observed_epsilon, one_step_epsilon, rollout_bound, BoundBranch, BoundInputs, BoundReport, BoundRow,
};
pub use constants::{lipschitz_linear, lipschitz_on_box, sup_field_difference, MAX_GRID_POINTS};
pub use metrics::{
    identified_switch, mse, relative_error, squared_errors, write_heat_error_csv,
    write_prediction_csv,
};
pub use rollout::{PiecewiseModel, Rollout};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid piecewise model: {0}")]
    InvalidModel(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("length mismatch: {left} vs {right}")]
    Length { left: usize, right: usize },
    #[error("prediction became non-finite at step {j}")]
    NonFinite { j: usize },
    #[error("reference state has zero norm at step {j}")]
    ZeroReference { j: usize },
    #[error("power iteration did not converge in {0} iterations")]
    NoConvergence(usize),
    #[error("evaluation grid has {0} points, more than the limit")]
    GridTooLarge(u128),
    #[error("invalid bound inputs: {0}")]
    InvalidBound(String),
    #[error(transparent)]
    Dynamics(#[from] crate::dynamics::DynamicsError),
}
