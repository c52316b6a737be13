//! Reference representations and the flat-output → full-state transform.

mod file;
mod flatness;
mod generators;
mod polynomial;
mod sampled;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::QuadrotorModel;
use crate::state::Setpoint;

pub(crate) use file::{fmt_f64, join_row, state_columns};
pub use file::{trajectory_load, trajectory_load_file, trajectory_save, trajectory_save_file, TRAJECTORY_HEADER};
pub use flatness::{flatness_setpoint, flatness_state, FlatOutput};
pub use generators::{generate_circle, generate_lemniscate, LoopShape, LoopTrajectory, SAMPLE_RATE};
pub use polynomial::{sample_polynomial, PolynomialReference};
pub use sampled::SampledTrajectory;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReferenceError {
    #[error("free-fall singularity at t = {t}: thrust direction undefined")]
    Singularity { t: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for ReferenceError {
    fn from(e: std::io::Error) -> Self {
        ReferenceError::Io(e.to_string())
    }
}

/// Hold a position with a fixed yaw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoverReference {
    pub p_ref: Vector3<f64>,
    pub yaw_ref: f64,
}

impl HoverReference {
    pub fn new(p_ref: Vector3<f64>, yaw_ref: f64) -> Result<Self, ReferenceError> {
        if !(p_ref.iter().all(|x| x.is_finite()) && yaw_ref.is_finite()) {
            return Err(ReferenceError::InvalidArgument("hover reference must be finite".into()));
        }
        Ok(Self { p_ref, yaw_ref })
    }
}

/// Fly a constant velocity with a yaw rate for `duration` seconds.
///
/// Realised as a moving hover target anchored at `p0`/`yaw0`, the pose
/// when the reference becomes active. After `duration` the target holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityReference {
    pub v_ref: Vector3<f64>,
    pub yaw_rate_ref: f64,
    pub t_start: f64,
    pub duration: f64,
    #[serde(default)]
    pub p0: Vector3<f64>,
    #[serde(default)]
    pub yaw0: f64,
}

impl VelocityReference {
    pub fn new(v_ref: Vector3<f64>, yaw_rate_ref: f64, t_start: f64, duration: f64) -> Result<Self, ReferenceError> {
        if !(duration > 0.0) {
            return Err(ReferenceError::InvalidArgument("velocity reference duration must be > 0".into()));
        }
        Ok(Self {
            v_ref,
            yaw_rate_ref,
            t_start,
            duration,
            p0: Vector3::zeros(),
            yaw0: 0.0,
        })
    }

    pub fn flat_output(&self, t: f64) -> FlatOutput {
        let tau = (t - self.t_start).clamp(0.0, self.duration);
        let moving = t >= self.t_start && t <= self.t_start + self.duration;
        let (v, r) = if moving {
            (self.v_ref, self.yaw_rate_ref)
        } else {
            (Vector3::zeros(), 0.0)
        };
        FlatOutput {
            t,
            p: self.p0 + self.v_ref * tau,
            v,
            yaw: self.yaw0 + self.yaw_rate_ref * tau,
            yaw_rate: r,
            ..FlatOutput::default()
        }
    }
}

/// Any reference the pilot can track.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    Hover(HoverReference),
    Velocity(VelocityReference),
    Polynomial(PolynomialReference),
    Sampled(SampledTrajectory),
}

impl Reference {
    /// Setpoint at absolute time `t`.
    pub fn setpoint_at(&self, t: f64, model: &QuadrotorModel) -> Result<Setpoint, ReferenceError> {
        match self {
            Reference::Hover(h) => flatness_setpoint(
                &FlatOutput {
                    t,
                    p: h.p_ref,
                    yaw: h.yaw_ref,
                    ..FlatOutput::default()
                },
                model,
            ),
            Reference::Velocity(v) => flatness_setpoint(&v.flat_output(t), model),
            Reference::Polynomial(p) => sample_polynomial(p, t, model),
            Reference::Sampled(s) => Ok(s.sample(t)),
        }
    }
}

/// Hover setpoint at `p` with yaw `yaw`.
pub fn hover_setpoint(t: f64, p: Vector3<f64>, yaw: f64, model: &QuadrotorModel) -> Setpoint {
    Reference::Hover(HoverReference { p_ref: p, yaw_ref: yaw })
        .setpoint_at(t, model)
        .expect("hover is never singular for g > 0")
}
