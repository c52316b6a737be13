use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::math::{attitude_from_thrust_and_yaw, heading_of, rotation_vector};
use crate::model::QuadrotorModel;
use crate::state::{e_z, Command, QuadState, Setpoint};

use super::PipelineError;

/// Gains of the cascaded geometric controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometricGains {
    pub kp: Vector3<f64>,
    pub kv: Vector3<f64>,
    /// Attitude gain on the tilt (roll/pitch) error.
    pub kq_xy: f64,
    /// Attitude gain on the yaw error.
    pub kq_z: f64,
}

impl Default for GeometricGains {
    fn default() -> Self {
        Self {
            kp: Vector3::new(6.0, 6.0, 8.0),
            kv: Vector3::new(4.0, 4.0, 5.0),
            kq_xy: 5.0,
            kq_z: 3.0,
        }
    }
}

impl GeometricGains {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let all = self.kp.iter().chain(self.kv.iter()).chain([&self.kq_xy, &self.kq_z]);
        if all.into_iter().any(|k| !(*k >= 0.0 && k.is_finite())) {
            return Err(PipelineError::Config("geometric gains must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricOutput {
    pub command: Command,
    pub attitude_des: UnitQuaternion<f64>,
    /// The desired thrust direction was undefined; the previous attitude
    /// command was kept.
    pub singular: bool,
}

/// Splits an attitude error into a tilt part followed by a yaw part,
/// `q_e = q_tilt ⊗ q_yaw`, and returns their rotation vectors.
fn tilt_yaw_split(q_e: &UnitQuaternion<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let q = if q_e.w < 0.0 { -q_e.into_inner() } else { q_e.into_inner() };
    let n = (q.w * q.w + q.k * q.k).sqrt();
    if n < 1e-9 {
        // Pure 180° tilt: no yaw component is defined.
        return (rotation_vector(q_e), Vector3::zeros());
    }
    let q_yaw = UnitQuaternion::new_unchecked(Quaternion::new(q.w / n, 0.0, 0.0, q.k / n));
    let q_tilt = UnitQuaternion::new_unchecked(Quaternion::new(
        n,
        (q.w * q.i - q.j * q.k) / n,
        (q.w * q.j + q.i * q.k) / n,
        0.0,
    ));
    (rotation_vector(&q_tilt), rotation_vector(&q_yaw))
}

/// One step of the geometric position/attitude controller.
///
/// `previous_attitude` is the last desired attitude; it is held when the
/// desired thrust direction degenerates (commanded free fall). Without
/// one, the current attitude is held.
pub fn control_geometric(
    state: &QuadState,
    setpoint: &Setpoint,
    gains: &GeometricGains,
    model: &QuadrotorModel,
    previous_attitude: Option<&UnitQuaternion<f64>>,
) -> GeometricOutput {
    let r = &setpoint.state;
    let a_des = r.a + gains.kp.component_mul(&(r.p - state.p)) + gains.kv.component_mul(&(r.v - state.v));
    let thrust_vec = a_des + e_z() * model.g;
    let c = thrust_vec.norm();
    let yaw = heading_of(&r.q);
    let held = *previous_attitude.unwrap_or(&state.q);
    let (q_des, singular) = if c > 1e-6 {
        match attitude_from_thrust_and_yaw(&(thrust_vec / c), yaw) {
            Some(q) => (q, false),
            None => (held, true),
        }
    } else {
        (held, true)
    };

    let q_e = state.q.inverse() * q_des;
    let (e_tilt, e_yaw) = tilt_yaw_split(&q_e);
    let w_cmd = e_tilt * gains.kq_xy + e_yaw * gains.kq_z + r.w;
    let w_cmd = w_cmd.map(|x| x.clamp(-model.w_max, model.w_max));

    let z_b = state.q * e_z();
    let thrust = (model.mass * thrust_vec.dot(&z_b)).clamp(4.0 * model.f_min, 4.0 * model.f_max);
    GeometricOutput {
        command: Command::collective_bodyrate(state.t, thrust, w_cmd),
        attitude_des: q_des,
        singular,
    }
}

/// Geometric controller with its held attitude command.
#[derive(Debug, Clone)]
pub struct GeometricController {
    pub gains: GeometricGains,
    last_attitude: Option<UnitQuaternion<f64>>,
}

impl GeometricController {
    pub fn new(gains: GeometricGains) -> Self {
        Self {
            gains,
            last_attitude: None,
        }
    }

    pub fn control(&mut self, state: &QuadState, setpoint: &Setpoint, model: &QuadrotorModel) -> GeometricOutput {
        let out = control_geometric(state, setpoint, &self.gains, model, self.last_attitude.as_ref());
        self.last_attitude = Some(out.attitude_des);
        out
    }
}
