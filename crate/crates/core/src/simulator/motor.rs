use nalgebra::Vector4;

/// Exact discrete first-order motor update over `dt`.
///
/// `Ω ← Ω + (1 − e^(−dt/τ))·(Ω_target − Ω)`, which matches the continuous
/// response at every sample time regardless of step size.
pub fn motor_step(speeds: &Vector4<f64>, targets: &Vector4<f64>, motor_tc: f64, dt: f64) -> Vector4<f64> {
    let k = -(-dt / motor_tc).exp_m1();
    speeds + (targets - speeds) * k
}
