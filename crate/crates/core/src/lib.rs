//! Learning switched dynamical systems from trajectory data.
//!
//! The time domain is bisected adaptively: each sub-interval gets its own
//! recurrent residual network approximating the one-step flow map, the
//! interval with the largest validation error is split at its midpoint, and
//! children are warm-started from their parent. Endpoints of the final
//! partition identify the switching instants.

pub mod adaptive;
pub mod dynamics;
pub mod evaluation;
pub mod experiment;
pub mod linalg;
pub mod nn;
pub mod rng;
pub mod textio;
pub mod training;
