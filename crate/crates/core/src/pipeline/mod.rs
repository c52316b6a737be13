//! The control pipeline: estimators, samplers, controllers, guard, bridges
//! and the pilot that sequences them once per control cycle.

mod bridge;
mod config;
mod estimator;
mod geometric;
mod guard;
mod indi;
mod mpc;
mod pilot;
mod sampler;

use thiserror::Error;

use crate::references::ReferenceError;

pub use bridge::{command_log_row, Ack, Bridge, BridgeError, LogBridge, SimBridge, COMMAND_LOG_HEADER};
pub use config::{
    BridgeConfig, EstimatorConfig, GuardConfig, InnerControllerConfig, OuterControllerConfig, PipelineConfig,
    MAX_CONTROL_RATE, MIN_CONTROL_RATE,
};
pub use estimator::{
    ekf_propagate, ekf_update_pose, estimator_feedthrough, Covariance, EkfConfig, EkfEstimator, EkfState, Estimator,
    FeedthroughEstimator, ImuSample, PoseMeasurement, UpdateOutcome, CHI2_6_999,
};
pub use geometric::{control_geometric, GeometricController, GeometricGains, GeometricOutput};
pub use guard::{guard_check, Guard, GuardStatus, GuardVerdict};
pub use indi::{control_indi, Butterworth2, IndiConfig, IndiController, IndiOutput};
pub use mpc::{control_mpc, MpcController, MpcOutput, MpcParams, MpcSolution};
pub use pilot::{
    Measurement, Pilot, PilotEvent, PilotInputs, PilotOutput, SolverStats, FEEDTHROUGH_TIMEOUT,
    MEASUREMENT_QUEUE_CAPACITY,
};
pub use sampler::{sample_position_based, sample_time_based, SamplerConfig, SamplerKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("timestamp regression: received t = {received} after t = {previous}")]
    TimestampRegression { previous: f64, received: f64 },
    #[error("estimator timeout: newest input is {age} s old")]
    EstimatorTimeout { age: f64 },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
}
