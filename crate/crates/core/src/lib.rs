//! Target-point path following for a unicycle-type vehicle.
//!
//! A point rigidly attached at distance `d` ahead of the vehicle is steered
//! onto a path of bounded curvature. The path is travelled by a virtual
//! reference unicycle whose forward speed is a second control input, which
//! turns path following into trajectory tracking with saturated feedback.
//!
//! Modules, bottom-up:
//! - [`path`]: curvature profile and reference unicycle
//! - [`steering`]: saturated laws, non-explosion budget, steering ODE
//! - [`kinematics`]: vehicle/target geometry, error coordinates, closed loop
//! - [`gains`]: stability conditions and gain synthesis
//! - [`lyapunov`]: strict Lyapunov function and its bounds
//! - [`sim`], [`scenario`], [`noise`], [`log`]: simulation and I/O

pub mod error;
pub mod gains;
pub mod kinematics;
pub mod log;
pub mod lyapunov;
pub mod noise;
pub mod path;
pub mod scenario;
pub mod sim;
pub mod steering;

pub use error::{Error, Result};
pub use gains::{check_conditions, synthesize_gains, ConditionReport, GainSet};
pub use kinematics::{ErrorCoords, SpeedProfile, TargetState, VehicleState, WorldState};
pub use log::{LogRecord, TrajectoryLog};
pub use path::{CurvatureProfile, PathSpec, ReferenceState};
pub use scenario::{InitialCondition, Scenario};
pub use sim::{run, run_batch, RunOutput, RunSummary};
pub use steering::Variant;
