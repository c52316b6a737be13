mod common;

use proptest::prelude::*;
use quadpilot::QuadrotorModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn sampled_derivatives_match_finite_differences() {
    for (name, traj) in common::flatness_cases() {
        let r = common::flatness_report(&traj);
        assert!(r.velocity_error < 1e-2, "{name}: velocity error {}", r.velocity_error);
        assert!(r.acceleration_error < 1e-1, "{name}: acceleration error {}", r.acceleration_error);
    }
}

#[test]
fn generated_thrusts_are_feasible() {
    let m = QuadrotorModel::default();
    for (name, traj) in common::flatness_cases() {
        let r = common::flatness_report(&traj);
        assert!(r.min_thrust >= m.f_min && r.max_thrust <= m.f_max, "{name}: {r:?}");
    }
}

#[test]
fn malformed_files_name_the_line() {
    let bad = common::malformed_mismatches();
    assert!(bad.is_empty(), "{bad:#?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn random_trajectories_round_trip(seed in any::<u64>()) {
        let traj = common::random_trajectory(&mut ChaCha8Rng::seed_from_u64(seed));
        let err = common::round_trip_error(&traj);
        prop_assert!(err <= 1e-12, "round-trip error {err:e}");
    }
}
