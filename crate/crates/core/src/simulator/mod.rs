//! Closed-loop vehicle simulation.
//!
//! One step runs, in order: the simulated low-level controller, the motor
//! model, the aerodynamics model and the rigid-body integrator. Commands
//! reach the simulator through a [`DelayLine`] that models transport
//! latency.

mod aero;
mod delay;
mod lowlevel;
mod motor;
mod rigid_body;
mod sensors;

use nalgebra::{Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aero::{aero_quadratic, AeroModel, QuadraticAero, Wrench};
pub use delay::DelayLine;
pub use lowlevel::{lowlevel_sim, LowLevelConfig};
pub use motor::motor_step;
pub use rigid_body::{rigid_body_step, IntegratorKind};
pub use sensors::{ImuConfig, ImuSimulator, PoseSensor, PoseSensorConfig};

use crate::model::{ModelError, QuadrotorModel};
use crate::state::{Command, QuadState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("simulation fault at step {step}: non-finite {what}")]
    NonFinite { step: u64, what: &'static str },
    #[error("invalid simulator configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Constant external wrench acting on the body, for disturbance tests.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Disturbance {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Integration step [s].
    pub dt: f64,
    pub integrator: IntegratorKind,
    pub lowlevel: LowLevelConfig,
    /// Command transport latency [s].
    pub latency: f64,
    /// Body-frame disturbance wrench.
    pub disturbance: Disturbance,
    /// Hold the body fixed (thrust test stand); rotors and forces still run.
    pub test_stand: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            integrator: IntegratorKind::Rk4,
            lowlevel: LowLevelConfig::default(),
            latency: 0.0,
            disturbance: Disturbance::default(),
            test_stand: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return Err(SimError::Config(format!("dt must be in (0, 0.01], got {}", self.dt)));
        }
        if !(self.latency >= 0.0 && self.latency.is_finite()) {
            return Err(SimError::Config(format!("latency must be >= 0, got {}", self.latency)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub quad: QuadState,
    /// Rotor speeds [rad/s].
    pub motor_speeds: Vector4<f64>,
    pub step: u64,
    /// `t0 + step·dt`.
    pub sim_time: f64,
    pub t0: f64,
}

impl SimState {
    /// Simulation state whose rotors already spin at the speeds producing
    /// `quad.f`.
    pub fn new(quad: QuadState, model: &QuadrotorModel) -> Self {
        Self {
            motor_speeds: quad.f.map(|f| model.speed_from_thrust(f)),
            sim_time: quad.t,
            t0: quad.t,
            quad,
            step: 0,
        }
    }
}

/// Advances the simulation by one step under `cmd`.
pub fn sim_step(
    sim: &SimState,
    cmd: &Command,
    model: &QuadrotorModel,
    cfg: &SimConfig,
    aero: &dyn AeroModel,
) -> Result<SimState, SimError> {
    let dt = cfg.dt;
    let step = sim.step;
    let fault = |what| SimError::NonFinite { step, what };
    let targets = lowlevel_sim(cmd, &sim.quad, model, &cfg.lowlevel);
    if !targets.iter().all(|x| x.is_finite()) {
        return Err(fault("motor targets"));
    }
    let speeds = motor_step(&sim.motor_speeds, &targets, model.motor_tc, dt);
    let (mut wrench, thrusts) = aero.evaluate(&speeds, &sim.quad, model);
    wrench.force += cfg.disturbance.force;
    wrench.torque += cfg.disturbance.torque;
    if !(wrench.force.iter().chain(wrench.torque.iter()).all(|x| x.is_finite())) {
        return Err(fault("wrench"));
    }
    let mut quad = if cfg.test_stand {
        QuadState {
            t: sim.quad.t + dt,
            ..sim.quad
        }
    } else {
        rigid_body_step(&sim.quad, &wrench, model, dt, cfg.integrator)
    };
    quad.f = thrusts;
    quad.fd = targets.map(|w| model.thrust_from_speed(w));
    let next = step + 1;
    quad.t = sim.t0 + next as f64 * dt;
    if !quad.is_valid() {
        return Err(fault("state"));
    }
    Ok(SimState {
        quad,
        motor_speeds: speeds,
        step: next,
        sim_time: quad.t,
        t0: sim.t0,
    })
}

/// Stateful simulator: owns the vehicle state, the command delay line and
/// the aerodynamics model.
pub struct Simulator {
    model: QuadrotorModel,
    cfg: SimConfig,
    state: SimState,
    delay: DelayLine,
    idle: Command,
    aero: Box<dyn AeroModel + Send>,
    max_quat_norm_dev: f64,
}

impl Simulator {
    /// Starts from `initial`. Rotors spin at the speeds matching
    /// `initial.f`, and until a command is released the simulator applies
    /// those thrusts as its idle command.
    pub fn new(model: QuadrotorModel, cfg: SimConfig, initial: QuadState) -> Result<Self, SimError> {
        model.validate()?;
        cfg.validate()?;
        if !initial.is_valid() {
            return Err(SimError::Config("initial state is not finite".into()));
        }
        let idle = Command::thrusts(initial.t, initial.f);
        Ok(Self {
            state: SimState::new(initial, &model),
            delay: DelayLine::new(cfg.latency, cfg.dt),
            idle,
            model,
            cfg,
            aero: Box::new(QuadraticAero),
            max_quat_norm_dev: 0.0,
        })
    }

    pub fn with_aero(mut self, aero: Box<dyn AeroModel + Send>) -> Self {
        self.aero = aero;
        self
    }

    pub fn with_idle_command(mut self, idle: Command) -> Self {
        self.idle = idle;
        self
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn model(&self) -> &QuadrotorModel {
        &self.model
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn time(&self) -> f64 {
        self.state.sim_time
    }

    /// Sends a command now; it is applied after the configured latency.
    pub fn push_command(&mut self, cmd: Command) {
        let send_time = self.state.step as f64 * self.cfg.dt;
        self.delay.push(cmd, send_time);
    }

    /// Command that the next step will apply.
    pub fn applied_command(&self) -> Command {
        self.delay.held().copied().unwrap_or(self.idle)
    }

    pub fn step(&mut self) -> Result<&SimState, SimError> {
        self.delay.pop(self.state.step);
        let cmd = self.applied_command();
        self.state = sim_step(&self.state, &cmd, &self.model, &self.cfg, self.aero.as_ref())?;
        let dev = (self.state.quad.q.coords.norm() - 1.0).abs();
        self.max_quat_norm_dev = self.max_quat_norm_dev.max(dev);
        Ok(&self.state)
    }

    /// Largest |‖q‖ − 1| seen after any step.
    pub fn max_quaternion_norm_deviation(&self) -> f64 {
        self.max_quat_norm_dev
    }
}
