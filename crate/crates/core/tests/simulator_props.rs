mod common;

use nalgebra::{Vector3, Vector4};
use proptest::prelude::*;
use quadpilot::simulator::{motor_step, sim_step, QuadraticAero, SimConfig, SimState, Simulator};
use quadpilot::{Command, QuadState, QuadrotorModel};

#[test]
fn rk4_is_fourth_order() {
    let (errors, orders) = common::rk4_convergence();
    for o in &orders {
        assert!((3.5..=4.5).contains(o), "errors {errors:?}, orders {orders:?}");
    }
}

#[test]
fn torque_free_tumble_conserves_energy_and_momentum() {
    let c = common::tumble_conservation();
    assert!(c.energy_drift < 1e-6, "energy drift {}", c.energy_drift);
    assert!(c.momentum_drift < 1e-6, "momentum drift {}", c.momentum_drift);
    assert!(c.max_norm_deviation <= 1e-9);
}

#[test]
fn hover_drift_below_tolerance_every_step() {
    let m = QuadrotorModel::default();
    let hover = Vector4::repeat(m.hover_thrust());
    let start = QuadState {
        p: Vector3::new(1.0, -2.0, 3.0),
        f: hover,
        fd: hover,
        ..QuadState::default()
    };
    let mut sim = Simulator::new(m, SimConfig::default(), start).unwrap();
    let mut prev = sim.state().quad;
    for _ in 0..5000 {
        let s = sim.step().unwrap().quad;
        let drift = (s.p - prev.p).amax().max((s.v - prev.v).amax()).max((s.w - prev.w).amax());
        assert!(drift < 1e-9, "drift {drift}");
        prev = s;
    }
}

#[test]
fn zero_speeds_leave_only_gravity() {
    let m = QuadrotorModel::default();
    let sim = SimState::new(QuadState::default(), &m);
    let next = sim_step(&sim, &Command::thrusts(0.0, Vector4::zeros()), &m, &SimConfig::default(), &QuadraticAero).unwrap();
    assert!((next.quad.a - Vector3::new(0.0, 0.0, -m.g)).norm() < 1e-12);
}

proptest! {
    #[test]
    fn motor_semigroup(w0 in 0.0f64..3000.0, target in 0.0f64..3000.0, dt in 1e-5f64..1e-2) {
        let m = QuadrotorModel::default();
        let (w0, target) = (Vector4::repeat(w0), Vector4::repeat(target));
        let half = motor_step(&motor_step(&w0, &target, m.motor_tc, dt / 2.0), &target, m.motor_tc, dt / 2.0);
        let full = motor_step(&w0, &target, m.motor_tc, dt);
        prop_assert!((half - full).amax() <= 1e-12 * (1.0 + full.amax()));
        let exact = target + (w0 - target) * (-dt / m.motor_tc).exp();
        prop_assert!((full - exact).amax() <= 1e-12 * (1.0 + exact.amax()));
    }
}
