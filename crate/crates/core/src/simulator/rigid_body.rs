use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::aero::Wrench;
use crate::math::{quaternion_integrate, quaternion_rate};
use crate::model::QuadrotorModel;
use crate::state::{gravity_world, QuadState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorKind {
    #[default]
    Rk4,
    ExplicitEuler,
    SymplecticEuler,
}

impl std::str::FromStr for IntegratorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rk4" => Ok(Self::Rk4),
            "euler" | "explicit_euler" => Ok(Self::ExplicitEuler),
            "symplectic" | "symplectic_euler" => Ok(Self::SymplecticEuler),
            other => Err(format!("unknown integrator '{other}' (expected rk4, euler or symplectic)")),
        }
    }
}

#[derive(Clone, Copy)]
struct Kinematic {
    p: Vector3<f64>,
    q: Quaternion<f64>,
    v: Vector3<f64>,
    w: Vector3<f64>,
}

impl Kinematic {
    fn axpy(&self, k: &Kinematic, h: f64) -> Kinematic {
        Kinematic {
            p: self.p + k.p * h,
            q: self.q + k.q * h,
            v: self.v + k.v * h,
            w: self.w + k.w * h,
        }
    }
}

struct Dynamics<'a> {
    wrench: &'a Wrench,
    model: &'a QuadrotorModel,
    gravity: Vector3<f64>,
}

impl Dynamics<'_> {
    fn linear_acc(&self, q: &Quaternion<f64>) -> Vector3<f64> {
        let r = UnitQuaternion::new_normalize(*q);
        r * self.wrench.force / self.model.mass + self.gravity
    }

    fn angular_acc(&self, w: &Vector3<f64>) -> Vector3<f64> {
        let j = self.model.inertia;
        (self.wrench.torque - w.cross(&j.component_mul(w))).component_div(&j)
    }

    fn derivative(&self, x: &Kinematic) -> Kinematic {
        Kinematic {
            p: x.v,
            q: quaternion_rate(&x.q, &x.w),
            v: self.linear_acc(&x.q),
            w: self.angular_acc(&x.w),
        }
    }
}

/// Advances position, attitude, velocity and bodyrate under a body-frame
/// wrench held constant over `dt`.
///
/// The attitude is renormalised after the step; `a` and `tau` are set to
/// the accelerations evaluated at the new state. Other fields carry over.
pub fn rigid_body_step(
    quad: &QuadState,
    wrench: &Wrench,
    model: &QuadrotorModel,
    dt: f64,
    kind: IntegratorKind,
) -> QuadState {
    let dynamics = Dynamics {
        wrench,
        model,
        gravity: gravity_world(model.g),
    };
    let x0 = Kinematic {
        p: quad.p,
        q: quad.q.into_inner(),
        v: quad.v,
        w: quad.w,
    };
    let x1 = match kind {
        IntegratorKind::Rk4 => {
            let k1 = dynamics.derivative(&x0);
            let k2 = dynamics.derivative(&x0.axpy(&k1, dt / 2.0));
            let k3 = dynamics.derivative(&x0.axpy(&k2, dt / 2.0));
            let k4 = dynamics.derivative(&x0.axpy(&k3, dt));
            Kinematic {
                p: x0.p + (k1.p + k2.p * 2.0 + k3.p * 2.0 + k4.p) * (dt / 6.0),
                q: x0.q + (k1.q + k2.q * 2.0 + k3.q * 2.0 + k4.q) * (dt / 6.0),
                v: x0.v + (k1.v + k2.v * 2.0 + k3.v * 2.0 + k4.v) * (dt / 6.0),
                w: x0.w + (k1.w + k2.w * 2.0 + k3.w * 2.0 + k4.w) * (dt / 6.0),
            }
        }
        IntegratorKind::ExplicitEuler => x0.axpy(&dynamics.derivative(&x0), dt),
        IntegratorKind::SymplecticEuler => {
            let v = x0.v + dynamics.linear_acc(&x0.q) * dt;
            let w = x0.w + dynamics.angular_acc(&x0.w) * dt;
            let q = quaternion_integrate(&UnitQuaternion::new_unchecked(x0.q), &w, dt).into_inner();
            Kinematic {
                p: x0.p + v * dt,
                q,
                v,
                w,
            }
        }
    };
    let q = UnitQuaternion::new_normalize(x1.q);
    QuadState {
        t: quad.t + dt,
        p: x1.p,
        q,
        v: x1.v,
        w: x1.w,
        a: dynamics.linear_acc(&x1.q),
        tau: dynamics.angular_acc(&x1.w),
        ..*quad
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn no_gravity() -> QuadrotorModel {
        QuadrotorModel {
            g: 0.0,
            ..QuadrotorModel::default()
        }
    }

    #[test]
    fn constant_yaw_torque_spins_up() {
        let m = no_gravity();
        let wrench = Wrench {
            force: Vector3::zeros(),
            torque: Vector3::new(0.0, 0.0, 0.01),
        };
        let mut s = QuadState::default();
        for _ in 0..1000 {
            s = rigid_body_step(&s, &wrench, &m, 1e-3, IntegratorKind::Rk4);
        }
        assert_abs_diff_eq!(s.w.z, 0.01 / m.inertia.z, epsilon = 1e-6);
    }

    #[test]
    fn symmetric_spin_keeps_rate() {
        let m = QuadrotorModel {
            inertia: Vector3::new(3e-3, 3e-3, 5e-3),
            g: 0.0,
            ..QuadrotorModel::default()
        };
        let mut s = QuadState {
            w: Vector3::new(0.0, 0.0, 7.0),
            ..QuadState::default()
        };
        for _ in 0..10_000 {
            s = rigid_body_step(&s, &Wrench::default(), &m, 1e-3, IntegratorKind::Rk4);
        }
        assert_abs_diff_eq!(s.w.norm(), 7.0, epsilon = 1e-9);
    }

    #[test]
    fn ballistic_arc_rk4_vs_euler() {
        let m = QuadrotorModel::default();
        let v0 = Vector3::new(3.0, -1.0, 4.0);
        let exact = v0 - Vector3::new(0.0, 0.0, 0.5 * m.g);
        let run = |kind| {
            let mut s = QuadState {
                v: v0,
                ..QuadState::default()
            };
            for _ in 0..1000 {
                s = rigid_body_step(&s, &Wrench::default(), &m, 1e-3, kind);
            }
            (s.p - exact).norm()
        };
        assert!(run(IntegratorKind::Rk4) < 1e-9);
        let euler = run(IntegratorKind::ExplicitEuler);
        assert!(euler < 5e-3 && euler > 1e-4, "{euler}");
    }

    /// Spring-like restoring force applied through the wrench: symplectic
    /// Euler keeps the energy bounded, explicit Euler pumps energy in.
    #[test]
    fn symplectic_energy_bounded_explicit_grows() {
        let m = no_gravity();
        let k = 3.0;
        let energy = |s: &QuadState| 0.5 * m.mass * s.v.norm_squared() + 0.5 * k * s.p.norm_squared();
        let run = |kind| {
            let mut s = QuadState {
                p: Vector3::new(1.0, 0.0, 0.0),
                ..QuadState::default()
            };
            let e0 = energy(&s);
            let mut max_dev: f64 = 0.0;
            for _ in 0..100_000 {
                let wrench = Wrench {
                    force: s.q.inverse() * (-k * s.p),
                    torque: Vector3::zeros(),
                };
                s = rigid_body_step(&s, &wrench, &m, 1e-3, kind);
                max_dev = max_dev.max((energy(&s) - e0).abs() / e0);
            }
            (max_dev, (energy(&s) - e0) / e0)
        };
        let (symp_dev, _) = run(IntegratorKind::SymplecticEuler);
        let (_, euler_growth) = run(IntegratorKind::ExplicitEuler);
        assert!(symp_dev < 0.01, "symplectic deviation {symp_dev}");
        assert!(euler_growth > 0.3, "explicit Euler growth {euler_growth}");
    }

    #[test]
    fn parse_integrator_names() {
        assert_eq!("rk4".parse::<IntegratorKind>().unwrap(), IntegratorKind::Rk4);
        assert_eq!("euler".parse::<IntegratorKind>().unwrap(), IntegratorKind::ExplicitEuler);
        assert_eq!("symplectic".parse::<IntegratorKind>().unwrap(), IntegratorKind::SymplecticEuler);
        assert!("midpoint".parse::<IntegratorKind>().is_err());
    }
}
