//! Physical parameter model and rotor allocation.
//!
//! Rotors are laid out in an X configuration, ordered front-left,
//! front-right, rear-left, rear-right, with spin signs (+, −, −, +).

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::GRAVITY;

/// Spin sign of each rotor, in allocation order.
pub const ROTOR_SPIN: [f64; 4] = [1.0, -1.0, -1.0, 1.0];
/// Unit position of each rotor in the body xy-plane, scaled by arm/√2.
pub const ROTOR_XY: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];

const MAX_ALLOCATION_CONDITION: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("allocation matrix is ill-conditioned (condition number {0:.3e})")]
    SingularAllocation(f64),
    #[error("non-finite {0} passed to allocation")]
    NonFinite(&'static str),
}

/// Quadrotor physical parameters. Inertia is diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadrotorModel {
    /// [kg]
    pub mass: f64,
    /// Diagonal of the inertia tensor [kg·m²].
    pub inertia: Vector3<f64>,
    /// Rotor distance from the centre of gravity [m].
    pub arm_length: f64,
    /// Thrust coefficient, thrust = c_f·Ω² [N·s²/rad²].
    pub c_f: f64,
    /// Rotor drag torque per unit thrust [m].
    pub c_tau: f64,
    pub f_min: f64,
    pub f_max: f64,
    /// Motor time constant [s].
    pub motor_tc: f64,
    /// Bodyrate limit [rad/s].
    pub w_max: f64,
    /// Optional linear body drag diagonal [N·s/m].
    pub drag_coeffs: Option<Vector3<f64>>,
    pub g: f64,
}

impl Default for QuadrotorModel {
    /// Defaults describe a 750 g racing quadrotor. Inertia, arm length and
    /// rotor coefficients are plausible values, not identified ones.
    fn default() -> Self {
        Self {
            mass: 0.75,
            inertia: Vector3::new(2.5e-3, 2.1e-3, 4.3e-3),
            arm_length: 0.125,
            // hover speed ≈ 1200 rad/s
            c_f: 1.28e-6,
            c_tau: 0.0135,
            f_min: 0.0,
            f_max: 9.5,
            motor_tc: 0.0391,
            w_max: 12.0,
            drag_coeffs: None,
            g: GRAVITY,
        }
    }
}

impl QuadrotorModel {
    pub fn validate(&self) -> Result<(), ModelError> {
        fn bad(name: &'static str, reason: impl Into<String>) -> ModelError {
            ModelError::InvalidParameter {
                name,
                reason: reason.into(),
            }
        }
        let all_finite = [
            self.mass,
            self.arm_length,
            self.c_f,
            self.c_tau,
            self.f_min,
            self.f_max,
            self.motor_tc,
            self.w_max,
            self.g,
        ]
        .iter()
        .chain(self.inertia.iter())
        .chain(self.drag_coeffs.iter().flat_map(|d| d.iter()))
        .all(|x| x.is_finite());
        if !all_finite {
            return Err(bad("model", "all parameters must be finite"));
        }
        if self.mass <= 0.0 {
            return Err(bad("mass", "must be positive"));
        }
        if self.inertia.iter().any(|&i| i <= 0.0) {
            return Err(bad("inertia", "diagonal entries must be positive"));
        }
        if self.f_min < 0.0 || self.f_min >= self.f_max {
            return Err(bad("f_min/f_max", "require 0 <= f_min < f_max"));
        }
        if self.motor_tc <= 0.0 {
            return Err(bad("motor_tc", "must be positive"));
        }
        if self.c_f <= 0.0 {
            return Err(bad("c_f", "must be positive"));
        }
        if self.w_max <= 0.0 {
            return Err(bad("w_max", "must be positive"));
        }
        if self.g < 0.0 {
            return Err(bad("g", "must be non-negative"));
        }
        if let Some(d) = self.drag_coeffs {
            if d.iter().any(|&c| c < 0.0) {
                return Err(bad("drag_coeffs", "must be non-negative"));
            }
        }
        let a = self.allocation_matrix();
        let sv = a.singular_values();
        let cond = sv.max() / sv.min();
        if !cond.is_finite() || cond >= MAX_ALLOCATION_CONDITION {
            return Err(ModelError::SingularAllocation(cond));
        }
        Ok(())
    }

    pub fn inertia_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&self.inertia)
    }

    /// Per-rotor thrust at hover [N].
    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.g / 4.0
    }

    pub fn thrust_from_speed(&self, speed: f64) -> f64 {
        self.c_f * speed * speed
    }

    /// Inverse thrust curve; negative thrusts map to zero speed, NaN stays NaN.
    pub fn speed_from_thrust(&self, thrust: f64) -> f64 {
        if thrust > 0.0 {
            (thrust / self.c_f).sqrt()
        } else if thrust.is_nan() {
            f64::NAN
        } else {
            0.0
        }
    }

    /// Maps rotor thrusts to (collective thrust, body torque).
    ///
    /// Row 0 is the collective thrust, rows 1..4 the body torque.
    pub fn allocation_matrix(&self) -> Matrix4<f64> {
        let d = self.arm_length / std::f64::consts::SQRT_2;
        let mut a = Matrix4::zeros();
        for (i, (&(x, y), &spin)) in ROTOR_XY.iter().zip(ROTOR_SPIN.iter()).enumerate() {
            a[(0, i)] = 1.0;
            a[(1, i)] = d * y;
            a[(2, i)] = -d * x;
            a[(3, i)] = self.c_tau * spin;
        }
        a
    }

    pub fn allocation(&self) -> Allocation {
        Allocation::new(self)
    }

    /// Clamp per-rotor thrusts into [f_min, f_max].
    pub fn clamp_thrusts(&self, f: &Vector4<f64>) -> Vector4<f64> {
        f.map(|x| x.clamp(self.f_min, self.f_max))
    }
}

/// Precomputed allocation matrix and its inverse for one model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    pub matrix: Matrix4<f64>,
    pub inverse: Matrix4<f64>,
    f_min: f64,
    f_max: f64,
}

/// Result of mapping a wrench back onto rotor thrusts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorThrusts {
    /// Thrusts after clamping to [f_min, f_max].
    pub thrusts: Vector4<f64>,
    /// Exact inverse before clamping.
    pub unclamped: Vector4<f64>,
    pub clamped: bool,
}

impl Allocation {
    pub fn new(model: &QuadrotorModel) -> Self {
        let matrix = model.allocation_matrix();
        // X layout rows are orthogonal, so this only fails for a zero arm or c_tau,
        // which `validate` rejects.
        let inverse = matrix.try_inverse().unwrap_or_else(Matrix4::zeros);
        Self {
            matrix,
            inverse,
            f_min: model.f_min,
            f_max: model.f_max,
        }
    }

    pub fn wrench(&self, thrusts: &Vector4<f64>) -> (f64, Vector3<f64>) {
        let w = self.matrix * thrusts;
        (w[0], Vector3::new(w[1], w[2], w[3]))
    }

    pub fn torque(&self, thrusts: &Vector4<f64>) -> Vector3<f64> {
        self.wrench(thrusts).1
    }

    pub fn thrusts(&self, collective_thrust: f64, torque: &Vector3<f64>) -> RotorThrusts {
        let unclamped = self.inverse * Vector4::new(collective_thrust, torque.x, torque.y, torque.z);
        let thrusts = unclamped.map(|x| x.clamp(self.f_min, self.f_max));
        RotorThrusts {
            thrusts,
            unclamped,
            clamped: thrusts != unclamped,
        }
    }
}

/// Collective thrust and body torque produced by rotor thrusts.
pub fn allocate(thrusts: &Vector4<f64>, model: &QuadrotorModel) -> Result<(f64, Vector3<f64>), ModelError> {
    if !thrusts.iter().all(|x| x.is_finite()) {
        return Err(ModelError::NonFinite("thrusts"));
    }
    Ok(model.allocation().wrench(thrusts))
}

/// Rotor thrusts producing the requested collective thrust and body torque.
pub fn allocate_inverse(collective_thrust: f64, torque: &Vector3<f64>, model: &QuadrotorModel) -> RotorThrusts {
    model.allocation().thrusts(collective_thrust, torque)
}
