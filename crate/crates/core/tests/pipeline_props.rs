mod common;

use nalgebra::{UnitQuaternion, Vector3};
use quadpilot::pipeline::{
    ekf_propagate, ekf_update_pose, EkfConfig, EkfState, ImuSample, PoseMeasurement, UpdateOutcome,
};
use quadpilot::state::gravity_world;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[test]
fn mpc_outputs_respect_rotor_box() {
    let r = common::random_mpc_solves(2_000, 11);
    assert_eq!(r.failures, 0);
    assert_eq!(r.violations, 0);
}

/// 10⁵ IMU propagations of a spinning, hovering body at 500 Hz with a pose
/// fix every fifth sample. The covariance must stay symmetric to 1e-12 and
/// positive semi-definite throughout.
#[test]
fn ekf_covariance_stays_symmetric_psd() {
    let cfg = EkfConfig::default();
    let g = 9.81;
    let dt: f64 = 2e-3;
    let rate = Vector3::new(0.3, -0.2, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let gyro_n = Normal::new(0.0, cfg.gyro_noise / dt.sqrt()).unwrap();
    let accel_n = Normal::new(0.0, cfg.accel_noise / dt.sqrt()).unwrap();
    let pose_n = Normal::new(0.0, 1e-3).unwrap();
    let noise3 = |n: &Normal<f64>, rng: &mut ChaCha8Rng| Vector3::from_fn(|_, _| n.sample(rng));

    let mut q_true = UnitQuaternion::identity();
    let p_true = Vector3::new(0.0, 0.0, 1.0);
    let mut ekf = EkfState::new(0.0, p_true, q_true, Vector3::zeros(), &cfg);
    let mut accepted = 0;
    for k in 1..=100_000 {
        q_true *= UnitQuaternion::from_scaled_axis(rate * dt);
        let imu = ImuSample {
            t: k as f64 * dt,
            gyro: rate + noise3(&gyro_n, &mut rng),
            accel: q_true.inverse() * -gravity_world(g) + noise3(&accel_n, &mut rng),
        };
        ekf = ekf_propagate(&ekf, &imu, dt, &cfg, g).expect("propagation keeps P PSD");
        assert!(ekf.asymmetry() < 1e-12, "cycle {k}: asymmetry {}", ekf.asymmetry());
        if k % 5 == 0 {
            let meas = PoseMeasurement {
                t: imu.t,
                p: p_true + noise3(&pose_n, &mut rng),
                q: q_true * UnitQuaternion::from_scaled_axis(noise3(&pose_n, &mut rng)),
                position_std: 1e-3,
                attitude_std: 1e-3,
            };
            let (next, outcome) = ekf_update_pose(&ekf, &meas, &cfg).expect("update keeps P PSD");
            accepted += (outcome == UpdateOutcome::Accepted) as usize;
            ekf = next;
            assert!(ekf.asymmetry() < 1e-12, "cycle {k}: asymmetry {}", ekf.asymmetry());
        }
        if k % 10_000 == 0 {
            let min = ekf.cov.symmetric_eigenvalues().min();
            assert!(min > -1e-12, "cycle {k}: min eigenvalue {min:e}");
        }
    }
    assert!(accepted > 19_000, "accepted {accepted} of 20000 pose fixes");
    assert!((ekf.p - p_true).norm() < 0.01);
    assert!(ekf.q.angle_to(&q_true) < 0.01);
}

/// The bodyrate output solves the same problem as the thrust output; only
/// the command differs. Its collective is the sum of the first input and its
/// bodyrate is the predicted rate at the second node, clamped.
#[test]
fn mpc_bodyrate_output_matches_thrust_solution() {
    use quadpilot::pipeline::{control_mpc, MpcOutput, MpcParams};
    use quadpilot::references::hover_setpoint;
    use quadpilot::{CommandMode, QuadState, QuadrotorModel};

    let model = QuadrotorModel::default();
    let thrust_params = MpcParams::default();
    let rate_params = MpcParams {
        output: MpcOutput::CollectiveBodyrate,
        ..thrust_params
    };
    let refs: Vec<_> = (0..thrust_params.horizon)
        .map(|k| hover_setpoint(k as f64 * thrust_params.dt, Vector3::new(1.0, -0.5, 2.0), 0.3, &model))
        .collect();
    for (k, w) in [Vector3::zeros(), Vector3::new(2.0, -1.0, 0.5), Vector3::new(30.0, 0.0, -30.0)]
        .into_iter()
        .enumerate()
    {
        let state = QuadState {
            p: Vector3::new(0.0, 0.0, 1.5),
            q: UnitQuaternion::from_euler_angles(0.2 * k as f64, -0.1, 0.4),
            w,
            ..QuadState::default()
        };
        let a = control_mpc(&state, &refs, &model, &thrust_params).unwrap();
        let b = control_mpc(&state, &refs, &model, &rate_params).unwrap();
        assert_eq!(b.command.mode(), CommandMode::CollectiveThrustBodyrate);
        let (collective, rate) = b.command.thrust_and_bodyrate().unwrap();
        assert_eq!(collective, a.command.single_rotor_thrusts().unwrap().sum());
        let expected = b.predicted[1].w.map(|x| x.clamp(-model.w_max, model.w_max));
        assert_eq!(rate, expected);
        assert!(rate.amax() <= model.w_max);
        assert_eq!(a.inputs, b.inputs);
    }
}
