//! Fixtures for the control-loop benchmarks: a circle reference, MPC
//! problems sampled from it and a pilot wired to a simulator bridge.

use std::sync::mpsc::Receiver;

use nalgebra::Vector3;
use quadpilot::harness::{ExperimentConfig, TrajectorySource};
use quadpilot::pipeline::{GuardConfig, MpcParams, OuterControllerConfig, Pilot, PilotInputs, PipelineConfig, SimBridge};
use quadpilot::references::{LoopShape, LoopTrajectory, Reference, SampledTrajectory};
use quadpilot::{Command, QuadState, QuadrotorModel, Setpoint};

pub fn circle() -> LoopTrajectory {
    LoopTrajectory {
        shape: LoopShape::Circle,
        center: [0.0, 0.0],
        size: 4.0,
        speed: 5.0,
        z: 2.0,
        laps: 2.0,
        ramp_time: 1.0,
        yaw: None,
    }
}

pub fn circle_reference(model: &QuadrotorModel) -> SampledTrajectory {
    circle().generate(model).expect("feasible circle")
}

pub fn mpc_pipeline() -> PipelineConfig {
    PipelineConfig {
        outer: OuterControllerConfig::Mpc(MpcParams::default()),
        ..PipelineConfig::default()
    }
}

/// State 10 cm off the circle at time `t` and the horizon setpoints that
/// follow it.
pub fn mpc_problem(reference: &SampledTrajectory, params: &MpcParams, t: f64) -> (QuadState, Vec<Setpoint>) {
    let mut state = reference.sample(t).state;
    state.p += Vector3::new(0.1, -0.05, 0.05);
    let setpoints = (0..params.horizon)
        .map(|k| reference.sample(t + k as f64 * params.dt))
        .collect();
    (state, setpoints)
}

/// A pilot flying the circle, with the receiving end of its bridge.
pub fn circle_pilot(pipeline: &PipelineConfig) -> (Pilot, Receiver<Command>, SampledTrajectory) {
    let model = QuadrotorModel::default();
    let reference = circle_reference(&model);
    let (bridge, rx) = SimBridge::channel();
    let mut pilot =
        Pilot::new(model, pipeline, GuardConfig::default(), Box::new(bridge)).expect("valid pipeline config");
    let start = reference.first().state;
    pilot.initialize_estimator(&start);
    pilot.set_reference(Reference::Sampled(reference.clone()), start.t);
    (pilot, rx, reference)
}

/// Pilot inputs carrying the reference state at `t` as the measurement.
pub fn inputs_at(reference: &SampledTrajectory, t: f64) -> PilotInputs {
    let mut state = reference.sample(t).state;
    state.t = t;
    PilotInputs {
        state: Some(state),
        ..PilotInputs::default()
    }
}

/// Circle experiment of the given length.
pub fn circle_experiment(pipeline: PipelineConfig, duration: f64) -> ExperimentConfig {
    ExperimentConfig {
        pipeline,
        duration,
        trajectory: TrajectorySource::Loop(circle()),
        ..ExperimentConfig::default()
    }
}
