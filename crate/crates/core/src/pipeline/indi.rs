use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

use crate::model::QuadrotorModel;
use crate::state::{Actuation, Command, QuadState};

use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndiConfig {
    /// Proportional gains from bodyrate error to desired angular
    /// acceleration [1/s].
    pub bodyrate_gains: Vector3<f64>,
    /// Cutoff of the second-order low-pass on the gyro derivative [Hz].
    pub cutoff_hz: f64,
}

impl Default for IndiConfig {
    fn default() -> Self {
        Self {
            bodyrate_gains: Vector3::new(20.0, 20.0, 10.0),
            cutoff_hz: 40.0,
        }
    }
}

impl IndiConfig {
    pub fn validate(&self, sample_rate: f64) -> Result<(), PipelineError> {
        if self.bodyrate_gains.iter().any(|k| !(*k >= 0.0 && k.is_finite())) {
            return Err(PipelineError::Config("indi bodyrate gains must be finite and >= 0".into()));
        }
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < 0.5 * sample_rate) {
            return Err(PipelineError::Config(format!(
                "indi cutoff {} Hz must lie in (0, {}) Hz for a {} Hz loop",
                self.cutoff_hz,
                0.5 * sample_rate,
                sample_rate
            )));
        }
        Ok(())
    }
}

/// Second-order Butterworth low-pass on 3-vectors, discretised with the
/// bilinear transform and pre-warped at the cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth2 {
    b: [f64; 3],
    a: [f64; 2],
    x: [Vector3<f64>; 2],
    y: [Vector3<f64>; 2],
    primed: bool,
}

impl Butterworth2 {
    pub fn new(cutoff_hz: f64, sample_rate: f64) -> Self {
        let k = (PI * cutoff_hz / sample_rate).tan();
        let k2 = k * k;
        let norm = 1.0 / (1.0 + SQRT_2 * k + k2);
        let b0 = k2 * norm;
        Self {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k2 - 1.0) * norm, (1.0 - SQRT_2 * k + k2) * norm],
            x: [Vector3::zeros(); 2],
            y: [Vector3::zeros(); 2],
            primed: false,
        }
    }

    /// Filters one sample. The first sample initialises the filter at
    /// steady state.
    pub fn filter(&mut self, x: &Vector3<f64>) -> Vector3<f64> {
        if !self.primed {
            self.x = [*x; 2];
            self.y = [*x; 2];
            self.primed = true;
            return *x;
        }
        let y = x * self.b[0] + self.x[0] * self.b[1] + self.x[1] * self.b[2] - self.y[0] * self.a[0] - self.y[1] * self.a[1];
        self.x = [*x, self.x[0]];
        self.y = [y, self.y[0]];
        y
    }

    pub fn output(&self) -> Option<Vector3<f64>> {
        self.primed.then_some(self.y[0])
    }

    pub fn reset(&mut self) {
        self.primed = false;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndiOutput {
    pub command: Command,
    /// At least one rotor thrust was clamped to its limits.
    pub clamped: bool,
    /// No angular-acceleration estimate was available; the plain model
    /// inversion was used instead.
    pub fallback: bool,
}

/// Incremental inversion of the rotational dynamics.
///
/// The desired angular acceleration comes from the bodyrate error (for
/// collective-thrust/bodyrate commands) or from the commanded torque (for
/// rotor-thrust commands). The new torque is the filtered measured torque
/// plus `J·(α_des − α_filtered)`.
pub fn control_indi(
    outer: &Command,
    state: &QuadState,
    alpha_filtered: Option<&Vector3<f64>>,
    torque_filtered: &Vector3<f64>,
    model: &QuadrotorModel,
    cfg: &IndiConfig,
) -> IndiOutput {
    let inertia = model.inertia_matrix();
    let alloc = model.allocation();
    let gyroscopic = state.w.cross(&(inertia * state.w));
    let (collective, alpha_des) = match outer.actuation {
        Actuation::CollectiveThrustBodyrate {
            collective_thrust,
            bodyrate,
        } => (collective_thrust, cfg.bodyrate_gains.component_mul(&(bodyrate - state.w))),
        Actuation::Thrusts(f) => {
            let (ct, tau) = alloc.wrench(&f);
            let alpha = inertia.try_inverse().expect("diagonal inertia is positive") * (tau - gyroscopic);
            (ct, alpha)
        }
    };
    let (torque, fallback) = match alpha_filtered {
        Some(alpha) => (torque_filtered + inertia * (alpha_des - alpha), false),
        None => (inertia * alpha_des + gyroscopic, true),
    };
    let rt = alloc.thrusts(collective, &torque);
    IndiOutput {
        command: Command::thrusts(outer.t, rt.thrusts),
        clamped: rt.clamped,
        fallback,
    }
}

/// INDI with its filters: differentiates the gyro and low-passes the
/// torque produced by the measured rotor thrusts with the same filter, so
/// both signals carry the same lag.
#[derive(Debug, Clone)]
pub struct IndiController {
    cfg: IndiConfig,
    alpha_filter: Butterworth2,
    torque_filter: Butterworth2,
    prev_w: Option<(f64, Vector3<f64>)>,
}

impl IndiController {
    pub fn new(cfg: IndiConfig, sample_rate: f64) -> Result<Self, PipelineError> {
        cfg.validate(sample_rate)?;
        Ok(Self {
            cfg,
            alpha_filter: Butterworth2::new(cfg.cutoff_hz, sample_rate),
            torque_filter: Butterworth2::new(cfg.cutoff_hz, sample_rate),
            prev_w: None,
        })
    }

    pub fn config(&self) -> &IndiConfig {
        &self.cfg
    }

    /// Feeds the latest state (bodyrate and measured rotor thrusts).
    pub fn update(&mut self, state: &QuadState, model: &QuadrotorModel) {
        if let Some((t_prev, w_prev)) = self.prev_w {
            let dt = state.t - t_prev;
            if dt > 0.0 {
                self.alpha_filter.filter(&((state.w - w_prev) / dt));
            }
        }
        self.prev_w = Some((state.t, state.w));
        self.torque_filter.filter(&model.allocation().torque(&state.f));
    }

    pub fn control(&mut self, outer: &Command, state: &QuadState, model: &QuadrotorModel) -> IndiOutput {
        self.update(state, model);
        let alpha = self.alpha_filter.output();
        let torque = self.torque_filter.output().unwrap_or_default();
        control_indi(outer, state, alpha.as_ref(), &torque, model, &self.cfg)
    }
}
