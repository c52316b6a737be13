//! Experiment fixtures shared by the integration tests and the acceptance
//! gate.
#![allow(dead_code)]

use nalgebra::{UnitQuaternion, Vector3, Vector4};
use quadpilot::harness::{ExperimentConfig, TrajectorySource};
use quadpilot::pipeline::{
    control_mpc, EstimatorConfig, GeometricGains, GuardConfig, IndiConfig, IndiController, InnerControllerConfig,
    MpcOutput, MpcParams, MpcSolution, OuterControllerConfig, PipelineConfig,
};
use quadpilot::references::{
    hover_setpoint, trajectory_load, trajectory_save, LoopShape, LoopTrajectory, ReferenceError, SampledTrajectory,
};
use quadpilot::simulator::{rigid_body_step, Disturbance, IntegratorKind, SimConfig, Simulator, Wrench};
use quadpilot::{Command, QuadState, QuadrotorModel, Setpoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two laps of a 4 m circle at 5 m/s and 2 m height, with one-second speed
/// ramps so the run starts and ends at rest.
pub fn circle_source() -> TrajectorySource {
    TrajectorySource::Loop(LoopTrajectory {
        shape: LoopShape::Circle,
        center: [0.0, 0.0],
        size: 4.0,
        speed: 5.0,
        z: 2.0,
        laps: 2.0,
        ramp_time: 1.0,
        yaw: None,
    })
}

pub fn geometric() -> PipelineConfig {
    PipelineConfig::default()
}

/// MPC optimising rotor thrusts and commanding collective thrust and
/// bodyrate to the simulated rate controller.
pub fn mpc_bodyrate() -> PipelineConfig {
    PipelineConfig {
        outer: OuterControllerConfig::Mpc(MpcParams {
            output: MpcOutput::CollectiveBodyrate,
            ..MpcParams::default()
        }),
        ..PipelineConfig::default()
    }
}

/// MPC on rotor thrusts with INDI closing the rotational loop.
pub fn mpc_indi() -> PipelineConfig {
    PipelineConfig {
        outer: OuterControllerConfig::Mpc(MpcParams::default()),
        inner: InnerControllerConfig::Indi(Default::default()),
        ..PipelineConfig::default()
    }
}

pub fn circle_task(pipeline: PipelineConfig) -> ExperimentConfig {
    ExperimentConfig {
        trajectory: circle_source(),
        duration: 12.0,
        pipeline,
        ..ExperimentConfig::default()
    }
}

pub fn hover_task(duration: f64) -> ExperimentConfig {
    ExperimentConfig {
        trajectory: TrajectorySource::Hover {
            position: Vector3::new(0.0, 0.0, 1.0),
            yaw: 0.0,
        },
        duration,
        ..ExperimentConfig::default()
    }
}

/// Thrust-free rigid body thrown upwards while tumbling about all three
/// axes (the initial rate has a large component on the intermediate axis).
pub fn tumble_initial() -> QuadState {
    QuadState {
        v: Vector3::new(2.0, -1.0, 5.0),
        w: Vector3::new(4.0, -3.0, 6.0),
        ..QuadState::default()
    }
}

pub fn integrate_free(model: &QuadrotorModel, s0: &QuadState, dt: f64, t_end: f64, kind: IntegratorKind) -> QuadState {
    let steps = (t_end / dt).round() as usize;
    let mut s = *s0;
    for _ in 0..steps {
        s = rigid_body_step(&s, &Wrench::default(), model, dt, kind);
    }
    s
}

/// Combined error in position, velocity, attitude angle and bodyrate.
pub fn state_distance(a: &QuadState, b: &QuadState) -> f64 {
    (a.p - b.p).norm() + (a.v - b.v).norm() + a.q.angle_to(&b.q) + (a.w - b.w).norm()
}

/// RK4 global errors over 1 s at dt ∈ {4, 2, 1, 0.5} ms against a step 16×
/// finer than the smallest, and the observed orders between neighbours.
pub fn rk4_convergence() -> (Vec<f64>, Vec<f64>) {
    let model = QuadrotorModel::default();
    let s0 = tumble_initial();
    let reference = integrate_free(&model, &s0, 0.5e-3 / 16.0, 1.0, IntegratorKind::Rk4);
    let errors: Vec<f64> = [4e-3, 2e-3, 1e-3, 0.5e-3]
        .iter()
        .map(|&dt| state_distance(&integrate_free(&model, &s0, dt, 1.0, IntegratorKind::Rk4), &reference))
        .collect();
    let orders = errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    (errors, orders)
}

pub struct Conservation {
    pub energy_drift: f64,
    pub momentum_drift: f64,
    pub max_norm_deviation: f64,
}

/// Largest relative drift of total energy and angular-momentum magnitude
/// over a 10 s torque-free tumble at dt = 1 ms with RK4.
pub fn tumble_conservation() -> Conservation {
    let model = QuadrotorModel::default();
    let j = model.inertia;
    let energy = |s: &QuadState| {
        0.5 * model.mass * s.v.norm_squared() + model.mass * model.g * s.p.z + 0.5 * s.w.dot(&j.component_mul(&s.w))
    };
    let momentum = |s: &QuadState| j.component_mul(&s.w).norm();
    let mut s = tumble_initial();
    let (e0, l0) = (energy(&s), momentum(&s));
    let mut out = Conservation {
        energy_drift: 0.0,
        momentum_drift: 0.0,
        max_norm_deviation: 0.0,
    };
    for _ in 0..10_000 {
        s = rigid_body_step(&s, &Wrench::default(), &model, 1e-3, IntegratorKind::Rk4);
        out.energy_drift = out.energy_drift.max(((energy(&s) - e0) / e0).abs());
        out.momentum_drift = out.momentum_drift.max(((momentum(&s) - l0) / l0).abs());
        out.max_norm_deviation = out.max_norm_deviation.max((s.q.coords.norm() - 1.0).abs());
    }
    out
}

pub struct RandomMpcOutcome {
    pub solves: usize,
    /// Rotor thrusts (commands and optimised inputs) outside the box.
    pub violations: usize,
    pub failures: usize,
}

/// Cold-started MPC solves on random models, states, references and
/// solver settings; counts every rotor thrust that leaves `[f_min, f_max]`.
pub fn random_mpc_solves(count: usize, seed: u64) -> RandomMpcOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = RandomMpcOutcome {
        solves: 0,
        violations: 0,
        failures: 0,
    };
    let sym = |rng: &mut ChaCha8Rng, r: f64| Vector3::new(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r));
    for _ in 0..count {
        let model = QuadrotorModel {
            f_min: rng.random_range(0.0..1.0),
            f_max: rng.random_range(5.0..9.5),
            ..QuadrotorModel::default()
        };
        let params = MpcParams {
            horizon: rng.random_range(5..=8),
            dt: rng.random_range(0.02..0.1),
            q_position: rng.random_range(0.0..500.0),
            q_attitude: rng.random_range(0.0..50.0),
            q_velocity: rng.random_range(0.1..50.0),
            q_bodyrate: rng.random_range(0.0..10.0),
            r_thrust: rng.random_range(0.01..10.0),
            max_iterations: rng.random_range(1..=3),
            ..MpcParams::default()
        };
        let axis = sym(&mut rng, 1.0);
        let state = QuadState {
            p: sym(&mut rng, 3.0),
            q: UnitQuaternion::from_scaled_axis(axis * rng.random_range(0.0..3.1)),
            v: sym(&mut rng, 6.0),
            w: sym(&mut rng, 10.0),
            ..QuadState::default()
        };
        let target = sym(&mut rng, 20.0);
        let yaw = rng.random_range(-3.0..3.0);
        let refs: Vec<Setpoint> = (0..params.horizon)
            .map(|k| hover_setpoint(k as f64 * params.dt, target, yaw, &model))
            .collect();
        out.solves += 1;
        match control_mpc(&state, &refs, &model, &params) {
            Ok(MpcSolution { command, inputs, .. }) => {
                let first = command.single_rotor_thrusts().expect("thrust output");
                for f in first.iter().chain(inputs.iter().flat_map(|u| u.iter())) {
                    if !(*f >= model.f_min && *f <= model.f_max) {
                        out.violations += 1;
                    }
                }
            }
            Err(_) => out.failures += 1,
        }
    }
    out
}

/// The trajectories the flatness checks run on: the 4 m circle at 5 m/s and
/// the 5 m lemniscate at 3, 5 and 7 m/s flown at cruise speed throughout,
/// plus ramped variants of the 5 m/s loops.
pub fn flatness_cases() -> Vec<(String, SampledTrajectory)> {
    let model = QuadrotorModel::default();
    let mut cases = Vec::new();
    for (shape, size, speed, ramps) in [
        (LoopShape::Circle, 4.0, 5.0, &[0.0, 1.0][..]),
        (LoopShape::Lemniscate, 5.0, 3.0, &[0.0][..]),
        (LoopShape::Lemniscate, 5.0, 5.0, &[0.0, 1.0][..]),
        (LoopShape::Lemniscate, 5.0, 7.0, &[0.0][..]),
    ] {
        for &ramp_time in ramps {
            let l = LoopTrajectory {
                shape,
                center: [0.0, 0.0],
                size,
                speed,
                z: 2.0,
                laps: 1.0,
                ramp_time,
                yaw: None,
            };
            let name = format!("{shape:?} size {size} m, {speed} m/s, ramp {ramp_time} s");
            cases.push((name, l.generate(&model).expect("feasible loop")));
        }
    }
    cases
}

#[derive(Debug, Clone, Copy)]
pub struct FlatnessReport {
    /// Largest |finite-difference velocity − sampled velocity| [m/s].
    pub velocity_error: f64,
    /// Same comparison one derivative up [m/s²].
    pub acceleration_error: f64,
    pub min_thrust: f64,
    pub max_thrust: f64,
}

/// Second-order three-point derivative on a possibly non-uniform grid.
fn three_point(t: [f64; 3], y: [Vector3<f64>; 3]) -> Vector3<f64> {
    let (h0, h1) = (t[1] - t[0], t[2] - t[1]);
    -y[0] * (h1 / (h0 * (h0 + h1))) + y[1] * ((h1 - h0) / (h0 * h1)) + y[2] * (h0 / (h1 * (h0 + h1)))
}

pub fn flatness_report(traj: &SampledTrajectory) -> FlatnessReport {
    let sp = traj.setpoints();
    let mut r = FlatnessReport {
        velocity_error: 0.0,
        acceleration_error: 0.0,
        min_thrust: f64::INFINITY,
        max_thrust: f64::NEG_INFINITY,
    };
    for w in sp.windows(3) {
        let t = [w[0].state.t, w[1].state.t, w[2].state.t];
        let dp = three_point(t, [w[0].state.p, w[1].state.p, w[2].state.p]);
        let dv = three_point(t, [w[0].state.v, w[1].state.v, w[2].state.v]);
        r.velocity_error = r.velocity_error.max((dp - w[1].state.v).norm());
        r.acceleration_error = r.acceleration_error.max((dv - w[1].state.a).norm());
    }
    for s in sp {
        let f = s.input.single_rotor_thrusts().expect("generated setpoints carry rotor thrusts");
        r.min_thrust = r.min_thrust.min(f.min());
        r.max_thrust = r.max_thrust.max(f.max());
    }
    r
}

/// Random trajectory spanning many orders of magnitude in every column.
pub fn random_trajectory(rng: &mut ChaCha8Rng) -> SampledTrajectory {
    let n = rng.random_range(2..120);
    let mut t = rng.random_range(-1e3..1e3);
    let any = |rng: &mut ChaCha8Rng| {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        sign * 10f64.powf(rng.random_range(-9.0..9.0))
    };
    let setpoints = (0..n)
        .map(|_| {
            t += 10f64.powf(rng.random_range(-6.0..0.0));
            let v3 = |rng: &mut ChaCha8Rng| Vector3::new(any(rng), any(rng), any(rng));
            let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let f = Vector4::from_fn(|_, _| rng.random_range(0.0..20.0));
            let state = QuadState {
                t,
                p: v3(rng),
                q: UnitQuaternion::from_scaled_axis(axis * 3.0),
                v: v3(rng),
                w: v3(rng),
                a: v3(rng),
                j: v3(rng),
                s: v3(rng),
                fd: f,
                f,
                ..QuadState::default()
            };
            Setpoint::new(state, Command::thrusts(t, f))
        })
        .collect();
    SampledTrajectory::new(setpoints).expect("strictly increasing times")
}

/// Saves and reloads `traj`; returns the largest relative field error
/// (absolute below magnitude 1).
pub fn round_trip_error(traj: &SampledTrajectory) -> f64 {
    let mut buf = Vec::new();
    trajectory_save(traj, &mut buf).expect("in-memory save");
    let back = trajectory_load(buf.as_slice()).expect("reload");
    assert_eq!(back.len(), traj.len());
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(1.0);
    let mut worst: f64 = 0.0;
    for (a, b) in traj.setpoints().iter().zip(back.setpoints()) {
        let (x, y) = (&a.state, &b.state);
        let pairs = [
            (x.p, y.p),
            (x.v, y.v),
            (x.w, y.w),
            (x.a, y.a),
            (x.j, y.j),
            (x.s, y.s),
        ];
        for (u, w) in pairs {
            for i in 0..3 {
                worst = worst.max(rel(u[i], w[i]));
            }
        }
        worst = worst.max(rel(x.t, y.t));
        let fa = a.input.single_rotor_thrusts().unwrap();
        let fb = b.input.single_rotor_thrusts().unwrap();
        for i in 0..4 {
            worst = worst.max(rel(x.q.coords[i], y.q.coords[i]));
            worst = worst.max(rel(fa[i], fb[i]));
        }
    }
    worst
}

/// Malformed trajectory files paired with the line the error must name.
pub fn malformed_trajectory_files() -> Vec<(&'static str, String, usize)> {
    let good = |t: f64| format!("{t},0,0,2,1,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,1.8,1.8,1.8,1.8");
    let h = quadpilot::references::TRAJECTORY_HEADER;
    vec![
        ("empty file", String::new(), 1),
        ("wrong header", format!("time,x,y,z\n{}\n{}\n", good(0.0), good(0.1)), 1),
        ("short row", format!("{h}\n{}\n0.1,0,0,2\n", good(0.0)), 3),
        ("long row", format!("{h}\n{}\n{}\n{},7\n", good(0.0), good(0.1), good(0.2)), 4),
        ("text value", format!("{h}\n{}\n{}\n", good(0.0), good(0.1).replace(",2,", ",two,")), 3),
        ("nan value", format!("{h}\n{}\n{}\n", good(0.0), good(0.1).replace(",2,", ",NaN,")), 3),
        ("repeated time", format!("{h}\n{}\n{}\n{}\n", good(0.0), good(0.1), good(0.1)), 4),
        ("zero quaternion", format!("{h}\n{}\n{}\n", good(0.0), good(0.1).replace(",1,0,0,0,", ",0,0,0,0,")), 3),
        ("single setpoint", format!("{h}\n{}\n", good(0.0)), 2),
    ]
}

/// Number of malformed files that were not rejected with the right line.
pub fn malformed_mismatches() -> Vec<String> {
    malformed_trajectory_files()
        .into_iter()
        .filter_map(|(name, text, line)| match trajectory_load(text.as_bytes()) {
            Err(ReferenceError::Parse { line: got, .. }) if got == line => None,
            other => Some(format!("{name}: expected error at line {line}, got {other:?}")),
        })
        .collect()
}

/// Circle flown on EKF estimates from noisy simulated IMU and pose sensors.
pub fn ekf_circle_task(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        seed,
        ..circle_task(PipelineConfig {
            estimator: EstimatorConfig::Ekf(Default::default()),
            ..geometric()
        })
    }
}

/// Hover with a deliberately undamped horizontal position loop, started
/// 0.3 m off target. The oscillation grows until it leaves the ±2 m guard
/// box, after which the backup pipeline must bring the vehicle to rest.
pub fn guard_task() -> ExperimentConfig {
    ExperimentConfig {
        trajectory: TrajectorySource::Hover {
            position: Vector3::new(0.0, 0.0, 2.0),
            yaw: 0.0,
        },
        initial_offset: Vector3::new(0.3, 0.0, 0.0),
        duration: 15.0,
        pipeline: PipelineConfig {
            outer: OuterControllerConfig::Geometric(GeometricGains {
                kp: Vector3::new(40.0, 40.0, 8.0),
                kv: Vector3::new(0.0, 0.0, 5.0),
                ..GeometricGains::default()
            }),
            ..PipelineConfig::default()
        },
        guard: GuardConfig {
            box_min: Vector3::new(-2.0, -2.0, 0.5),
            box_max: Vector3::new(2.0, 2.0, 4.0),
            ..GuardConfig::default()
        },
        ..ExperimentConfig::default()
    }
}

/// Mean steady-state bodyrate error of a vehicle commanded to yaw at
/// 0.5 rad/s against a constant disturbance torque. The 100 Hz command is
/// either passed straight to the simulated rate controller or first turned
/// into rotor thrusts by INDI. Averaged over the last second of 4 s.
pub fn indi_bodyrate_error(indi: bool, torque: Vector3<f64>) -> f64 {
    let m = QuadrotorModel::default();
    let cfg = SimConfig {
        disturbance: Disturbance {
            torque,
            ..Disturbance::default()
        },
        ..SimConfig::default()
    };
    let hover = Vector4::repeat(m.hover_thrust());
    let initial = QuadState {
        f: hover,
        fd: hover,
        ..QuadState::at_rest(0.0, Vector3::new(0.0, 0.0, 5.0), 0.0)
    };
    let mut sim = Simulator::new(m, cfg, initial).expect("valid simulator config");
    let mut ctl = IndiController::new(IndiConfig::default(), 100.0).expect("valid indi config");
    let w_des = Vector3::new(0.0, 0.0, 0.5);
    let (mut sum, mut n) = (0.0, 0);
    for k in 0..4000 {
        if k % 10 == 0 {
            let s = sim.state().quad;
            let cmd = Command::collective_bodyrate(s.t, m.mass * m.g, w_des);
            let cmd = if indi { ctl.control(&cmd, &s, &m).command } else { cmd };
            sim.push_command(cmd);
        }
        let s = sim.step().expect("finite simulation");
        if k >= 3000 {
            sum += (s.quad.w - w_des).norm();
            n += 1;
        }
    }
    sum / n as f64
}
