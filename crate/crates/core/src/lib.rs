//! A modular quadrotor flight stack.
//!
//! The crate is organised the way the control loop runs:
//!
//! * [`state`], [`model`] and [`math`] hold the value types shared by every
//!   other module (vehicle state, low-level commands, setpoints, the physical
//!   parameter model and control allocation).
//! * [`references`] turns flat outputs (position and yaw with their
//!   derivatives) into full setpoints and stores sampled trajectories on disk.
//! * [`pipeline`] contains the pilot, which runs one control cycle as
//!   estimator → guard → sampler → outer controller → optional inner
//!   controller → bridge.
//! * [`simulator`] is a 1 kHz closed-loop vehicle simulation with a
//!   low-level controller, first-order motors, quadratic rotor aerodynamics
//!   and rigid-body integration, behind a command-transport delay line.
//! * [`harness`] wires pilot and simulator together for experiments and
//!   computes tracking metrics.
//!
//! Frame conventions are fixed crate-wide: body z along thrust, body x
//! forward, world z against gravity. Translational derivatives are expressed
//! in the world frame and rotational derivatives in the body frame.

pub mod harness;
mod jet;
pub mod math;
pub mod model;
pub mod pipeline;
pub mod references;
pub mod simulator;
pub mod state;

pub use model::{allocate, allocate_inverse, Allocation, ModelError, QuadrotorModel};
pub use state::{Actuation, Command, CommandError, CommandMode, QuadState, Setpoint};
