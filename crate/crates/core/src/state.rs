//! Vehicle state, low-level commands and setpoints.

use nalgebra::{UnitQuaternion, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Standard gravity used by the default model [m/s²].
pub const GRAVITY: f64 = 9.81;

/// Gravity vector in the world frame. World z points against gravity.
pub fn gravity_world(g: f64) -> Vector3<f64> {
    Vector3::new(0.0, 0.0, -g)
}

/// Unit vector along world z.
pub fn e_z() -> Vector3<f64> {
    Vector3::z()
}

/// Full time-stamped vehicle state.
///
/// `q` rotates body-frame vectors into the world frame. `p`, `v`, `a`, `j`
/// and `s` live in the world frame; `w` and `tau` (angular acceleration) in
/// the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadState {
    pub t: f64,
    pub p: Vector3<f64>,
    pub q: UnitQuaternion<f64>,
    pub v: Vector3<f64>,
    pub w: Vector3<f64>,
    pub a: Vector3<f64>,
    pub tau: Vector3<f64>,
    pub j: Vector3<f64>,
    pub s: Vector3<f64>,
    /// Gyroscope bias.
    pub bw: Vector3<f64>,
    /// Accelerometer bias.
    pub ba: Vector3<f64>,
    /// Desired single-rotor thrusts.
    pub fd: Vector4<f64>,
    /// Actual single-rotor thrusts.
    pub f: Vector4<f64>,
}

impl Default for QuadState {
    fn default() -> Self {
        Self {
            t: 0.0,
            p: Vector3::zeros(),
            q: UnitQuaternion::identity(),
            v: Vector3::zeros(),
            w: Vector3::zeros(),
            a: Vector3::zeros(),
            tau: Vector3::zeros(),
            j: Vector3::zeros(),
            s: Vector3::zeros(),
            bw: Vector3::zeros(),
            ba: Vector3::zeros(),
            fd: Vector4::zeros(),
            f: Vector4::zeros(),
        }
    }
}

impl QuadState {
    /// Resting state at `p` with the given yaw. Thrust fields are left zero.
    pub fn at_rest(t: f64, p: Vector3<f64>, yaw: f64) -> Self {
        Self {
            t,
            p,
            q: UnitQuaternion::from_euler_angles(0.0, 0.0, yaw),
            ..Self::default()
        }
    }

    /// True when the timestamp and every vector field is finite.
    pub fn is_valid(&self) -> bool {
        self.t.is_finite()
            && self.p.iter().all(|x| x.is_finite())
            && self.q.coords.iter().all(|x| x.is_finite())
            && [self.v, self.w, self.a, self.tau, self.j, self.s, self.bw, self.ba]
                .iter()
                .all(|v| v.iter().all(|x| x.is_finite()))
            && self.fd.iter().all(|x| x.is_finite())
            && self.f.iter().all(|x| x.is_finite())
    }

    pub fn yaw(&self) -> f64 {
        crate::math::heading_of(&self.q)
    }

    /// Re-project the orientation onto the unit sphere.
    pub fn renormalize(&mut self) {
        self.q = UnitQuaternion::new_normalize(self.q.into_inner());
    }
}

/// The two low-level command modalities a bridge accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CommandMode {
    SingleRotorThrusts,
    CollectiveThrustBodyrate,
}

impl CommandMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            CommandMode::SingleRotorThrusts => "SINGLE_ROTOR_THRUSTS",
            CommandMode::CollectiveThrustBodyrate => "COLLECTIVE_THRUST_BODYRATE",
        }
    }
}

impl std::fmt::Display for CommandMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CommandMode {
    type Err = CommandError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "SINGLE_ROTOR_THRUSTS" => Ok(CommandMode::SingleRotorThrusts),
            "COLLECTIVE_THRUST_BODYRATE" => Ok(CommandMode::CollectiveThrustBodyrate),
            other => Err(CommandError::UnknownMode(other.to_string())),
        }
    }
}

/// Command payload. Only the payload matching the mode exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Actuation {
    /// Per-rotor thrusts [N].
    Thrusts(Vector4<f64>),
    /// Collective thrust [N] along body z and bodyrate [rad/s].
    CollectiveThrustBodyrate {
        collective_thrust: f64,
        bodyrate: Vector3<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CommandError {
    #[error("command is in {actual} mode, cannot read {requested} payload")]
    WrongMode {
        actual: CommandMode,
        requested: CommandMode,
    },
    #[error("unknown command mode '{0}'")]
    UnknownMode(String),
}

/// A time-stamped low-level command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub t: f64,
    pub actuation: Actuation,
}

impl Command {
    pub fn thrusts(t: f64, thrusts: Vector4<f64>) -> Self {
        Self {
            t,
            actuation: Actuation::Thrusts(thrusts),
        }
    }

    pub fn collective_bodyrate(t: f64, collective_thrust: f64, bodyrate: Vector3<f64>) -> Self {
        Self {
            t,
            actuation: Actuation::CollectiveThrustBodyrate {
                collective_thrust,
                bodyrate,
            },
        }
    }

    pub fn mode(&self) -> CommandMode {
        match self.actuation {
            Actuation::Thrusts(_) => CommandMode::SingleRotorThrusts,
            Actuation::CollectiveThrustBodyrate { .. } => CommandMode::CollectiveThrustBodyrate,
        }
    }

    pub fn single_rotor_thrusts(&self) -> Result<Vector4<f64>, CommandError> {
        match self.actuation {
            Actuation::Thrusts(f) => Ok(f),
            _ => Err(CommandError::WrongMode {
                actual: self.mode(),
                requested: CommandMode::SingleRotorThrusts,
            }),
        }
    }

    pub fn collective_thrust(&self) -> Result<f64, CommandError> {
        match self.actuation {
            Actuation::CollectiveThrustBodyrate {
                collective_thrust, ..
            } => Ok(collective_thrust),
            _ => Err(CommandError::WrongMode {
                actual: self.mode(),
                requested: CommandMode::CollectiveThrustBodyrate,
            }),
        }
    }

    /// Collective thrust and bodyrate together.
    pub fn thrust_and_bodyrate(&self) -> Result<(f64, Vector3<f64>), CommandError> {
        Ok((self.collective_thrust()?, self.bodyrate()?))
    }

    pub fn bodyrate(&self) -> Result<Vector3<f64>, CommandError> {
        match self.actuation {
            Actuation::CollectiveThrustBodyrate { bodyrate, .. } => Ok(bodyrate),
            _ => Err(CommandError::WrongMode {
                actual: self.mode(),
                requested: CommandMode::CollectiveThrustBodyrate,
            }),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && match self.actuation {
                Actuation::Thrusts(f) => f.iter().all(|x| x.is_finite()),
                Actuation::CollectiveThrustBodyrate {
                    collective_thrust,
                    bodyrate,
                } => collective_thrust.is_finite() && bodyrate.iter().all(|x| x.is_finite()),
            }
    }
}

/// One reference point: a desired state and the input that attains it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setpoint {
    pub state: QuadState,
    pub input: Command,
}

impl Setpoint {
    /// Builds a setpoint, stamping the input with the state's time.
    pub fn new(state: QuadState, mut input: Command) -> Self {
        input.t = state.t;
        Self { state, input }
    }

    /// Setpoint whose input is the state's desired rotor thrusts.
    pub fn from_state(state: QuadState) -> Self {
        Self::new(state, Command::thrusts(state.t, state.fd))
    }
}
