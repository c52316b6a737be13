use nalgebra::{Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::model::QuadrotorModel;
use crate::state::{Actuation, Command, QuadState};

/// Gains of the simulated flight-controller bodyrate loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowLevelConfig {
    /// Proportional bodyrate gains [1/s].
    pub bodyrate_gains: Vector3<f64>,
}

impl Default for LowLevelConfig {
    fn default() -> Self {
        Self {
            bodyrate_gains: Vector3::new(20.0, 20.0, 10.0),
        }
    }
}

/// Motor speed targets for a command.
///
/// Thrust commands map directly through the inverse thrust curve. Bodyrate
/// commands run a proportional rate loop with gyroscopic feed-forward, then
/// allocate collective thrust and torque onto rotors.
pub fn lowlevel_sim(cmd: &Command, state: &QuadState, model: &QuadrotorModel, cfg: &LowLevelConfig) -> Vector4<f64> {
    let thrusts = match cmd.actuation {
        Actuation::Thrusts(f) => f,
        Actuation::CollectiveThrustBodyrate {
            collective_thrust,
            bodyrate,
        } => {
            let j = model.inertia;
            let w = state.w;
            let rate_err = bodyrate - w;
            let torque = j.component_mul(&cfg.bodyrate_gains.component_mul(&rate_err)) + w.cross(&j.component_mul(&w));
            model.allocation().thrusts(collective_thrust, &torque).unclamped
        }
    };
    let lo = model.speed_from_thrust(model.f_min);
    let hi = model.speed_from_thrust(model.f_max);
    thrusts.map(|f| model.speed_from_thrust(f).clamp(lo, hi))
}
