//! Experiment harness: closed-loop runs of pilot and simulator, latency
//! sweeps, tracking metrics and the thrust-step experiment.
//!
//! Every run is single-threaded and deterministic. Sweeps run experiments in
//! parallel since they share nothing mutable.

mod config;
mod experiment;
mod metrics;
mod step_response;

use std::path::PathBuf;

use thiserror::Error;

use crate::pipeline::PipelineError;
use crate::references::ReferenceError;
use crate::simulator::SimError;

pub use config::{ExperimentConfig, SensorSettings, SimSettings, TrajectorySource};
pub use experiment::{latency_sweep, run_experiment, ExperimentOutput, SweepRow, SweepTable};
pub use metrics::{compute_rmse, read_state_log, state_log_header, MetricsReport};
pub use step_response::{thrust_step_response, StepExperiment, StepResponse};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{}: {message}", path.display())]
    Config { path: PathBuf, message: String },
    #[error("trajectory {}: {source}", path.display())]
    Trajectory { path: PathBuf, source: ReferenceError },
    #[error("usage: {0}")]
    Usage(String),
    #[error("metrics: {0}")]
    Metrics(String),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code: 1 for configuration and usage problems, 3 for
    /// runtime failures. Guard aborts are not errors; callers map them to 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. }
            | HarnessError::Trajectory { .. }
            | HarnessError::Usage(_)
            | HarnessError::Reference(_) => 1,
            HarnessError::Pipeline(PipelineError::Config(_)) => 1,
            _ => 3,
        }
    }
}
