use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use super::ReferenceError;
use crate::jet::{cross, normalize, Jet, JetVec};
use crate::math::vee;
use crate::model::QuadrotorModel;
use crate::state::{QuadState, Setpoint};

/// Flat output of the quadrotor: position with derivatives up to snap, and
/// yaw with its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlatOutput {
    pub t: f64,
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
    pub a: Vector3<f64>,
    pub j: Vector3<f64>,
    pub s: Vector3<f64>,
    pub yaw: f64,
    pub yaw_rate: f64,
    pub yaw_acc: f64,
}

/// Full state implied by a flat output.
///
/// Body z follows the thrust direction `a + g·e_z`; the attitude is completed
/// by the heading `yaw`. Bodyrate and angular acceleration come from the first
/// and second time derivatives of the resulting rotation, which are propagated
/// exactly with Taylor jets. Desired rotor thrusts are the unclamped inverse
/// allocation of the required collective thrust and torque.
pub fn flatness_state(flat: &FlatOutput, model: &QuadrotorModel) -> Result<QuadState, ReferenceError> {
    let singular = ReferenceError::Singularity { t: flat.t };
    let g = model.g;
    let thrust_dir: JetVec<3> = [0, 1, 2].map(|i| {
        let lift = if i == 2 { g } else { 0.0 };
        Jet::from_derivatives(&[flat.a[i] + lift, flat.j[i], flat.s[i]])
    });
    let (z_b, c) = normalize(&thrust_dir);
    if !(c.value() > 1e-6) {
        return Err(singular);
    }
    let yaw: Jet<3> = Jet::from_derivatives(&[flat.yaw, flat.yaw_rate, flat.yaw_acc]);
    let (sy, cy) = yaw.sin_cos();
    let x_c = [cy, sy, Jet::constant(0.0)];
    let y_raw = cross(&z_b, &x_c);
    let (y_b, n) = normalize(&y_raw);
    if !(n.value() > 1e-9) {
        return Err(singular);
    }
    let x_b = cross(&y_b, &z_b);

    let rot = |k: usize| {
        Matrix3::from_fn(|r, col| {
            let axis = match col {
                0 => &x_b,
                1 => &y_b,
                _ => &z_b,
            };
            axis[r].derivative(k)
        })
    };
    let (r0, r1, r2) = (rot(0), rot(1), rot(2));
    let w_hat = r0.transpose() * r1;
    let w = vee(&w_hat);
    let w_dot = vee(&(r0.transpose() * r2 - w_hat * w_hat));

    let inertia = model.inertia_matrix();
    let torque = inertia * w_dot + w.cross(&(inertia * w));
    let collective = model.mass * c.value();
    let fd = model.allocation().thrusts(collective, &torque).unclamped;

    Ok(QuadState {
        t: flat.t,
        p: flat.p,
        q: UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r0)),
        v: flat.v,
        w,
        a: flat.a,
        tau: w_dot,
        j: flat.j,
        s: flat.s,
        fd,
        f: fd,
        ..QuadState::default()
    })
}

/// [`flatness_state`] paired with its rotor-thrust input.
pub fn flatness_setpoint(flat: &FlatOutput, model: &QuadrotorModel) -> Result<Setpoint, ReferenceError> {
    flatness_state(flat, model).map(Setpoint::from_state)
}
