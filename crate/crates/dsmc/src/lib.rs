//! Adaptive second-order discrete sliding mode control toolkit.
//!
//! Generic scalar DSMC laws with online uncertainty estimation, a
//! four-state mean-value spark-ignition engine case study driven by four
//! cascaded SISO controllers, Lyapunov-based stability verification, and
//! a deterministic simulation harness with CSV logging, tracking-error
//! metrics and sampling-time comparison tables.

pub mod cli;
pub mod config;
pub mod csvlog;
pub mod engine;
pub mod lyapunov;
pub mod metrics;
pub mod profile;
pub mod sim;
pub mod sliding;

pub use engine::{EngineParams, EngineState, EngineUncertainty};
pub use lyapunov::{certify_beta, delta_v_closed_form, lyapunov_value};
pub use sim::{run, SimConfig, TrajectoryLog};
pub use sliding::{DsmcChannel, ScalarAffinePlant};
