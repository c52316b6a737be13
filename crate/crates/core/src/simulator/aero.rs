use nalgebra::{Vector3, Vector4};

use crate::model::QuadrotorModel;
use crate::state::QuadState;

/// Force and torque in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

/// Rotor aerodynamics: maps rotor speeds and ego-motion to a body wrench
/// and the individual rotor thrusts.
///
/// Higher-fidelity rotor models (e.g. blade-element momentum) plug in here.
pub trait AeroModel {
    fn evaluate(&self, speeds: &Vector4<f64>, state: &QuadState, model: &QuadrotorModel) -> (Wrench, Vector4<f64>);
}

/// Thrust proportional to rotor speed squared, plus optional linear body
/// drag.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuadraticAero;

impl AeroModel for QuadraticAero {
    fn evaluate(&self, speeds: &Vector4<f64>, state: &QuadState, model: &QuadrotorModel) -> (Wrench, Vector4<f64>) {
        let thrusts = speeds.map(|w| model.thrust_from_speed(w));
        (aero_quadratic(speeds, state, model), thrusts)
    }
}

pub fn aero_quadratic(speeds: &Vector4<f64>, state: &QuadState, model: &QuadrotorModel) -> Wrench {
    let thrusts = speeds.map(|w| model.thrust_from_speed(w));
    let (collective, torque) = model.allocation().wrench(&thrusts);
    let mut force = Vector3::new(0.0, 0.0, collective);
    if let Some(d) = model.drag_coeffs {
        let v_body = state.q.inverse() * state.v;
        force -= d.component_mul(&v_body);
    }
    Wrench { force, torque }
}
