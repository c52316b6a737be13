use nalgebra::{UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::pipeline::{ImuSample, PoseMeasurement};
use crate::state::{gravity_world, QuadState};

/// IMU noise model. Densities are per √Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImuConfig {
    pub rate: f64,
    pub gyro_noise: f64,
    pub accel_noise: f64,
    pub gyro_bias_walk: f64,
    pub accel_bias_walk: f64,
}

impl Default for ImuConfig {
    fn default() -> Self {
        Self {
            rate: 500.0,
            gyro_noise: 1e-3,
            accel_noise: 1e-2,
            gyro_bias_walk: 1e-5,
            accel_bias_walk: 1e-4,
        }
    }
}

impl ImuConfig {
    pub fn noiseless(rate: f64) -> Self {
        Self {
            rate,
            gyro_noise: 0.0,
            accel_noise: 0.0,
            gyro_bias_walk: 0.0,
            accel_bias_walk: 0.0,
        }
    }
}

fn gaussian3(rng: &mut ChaCha8Rng, std: f64) -> Vector3<f64> {
    if std == 0.0 {
        return Vector3::zeros();
    }
    Vector3::from_fn(|_, _| {
        let n: f64 = StandardNormal.sample(rng);
        n * std
    })
}

/// Synthesises IMU samples from the true state with white noise and
/// random-walk biases.
#[derive(Debug, Clone)]
pub struct ImuSimulator {
    cfg: ImuConfig,
    rng: ChaCha8Rng,
    gyro_bias: Vector3<f64>,
    accel_bias: Vector3<f64>,
    g: f64,
}

impl ImuSimulator {
    pub fn new(cfg: ImuConfig, g: f64, seed: u64) -> Self {
        Self {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
            gyro_bias: Vector3::zeros(),
            accel_bias: Vector3::zeros(),
            g,
        }
    }

    pub fn period(&self) -> f64 {
        1.0 / self.cfg.rate
    }

    pub fn sample(&mut self, state: &QuadState) -> ImuSample {
        let dt = self.period();
        let sqrt_rate = self.cfg.rate.sqrt();
        self.gyro_bias += gaussian3(&mut self.rng, self.cfg.gyro_bias_walk * dt.sqrt());
        self.accel_bias += gaussian3(&mut self.rng, self.cfg.accel_bias_walk * dt.sqrt());
        let specific_force = state.q.inverse() * (state.a - gravity_world(self.g));
        ImuSample {
            t: state.t,
            gyro: state.w + self.gyro_bias + gaussian3(&mut self.rng, self.cfg.gyro_noise * sqrt_rate),
            accel: specific_force + self.accel_bias + gaussian3(&mut self.rng, self.cfg.accel_noise * sqrt_rate),
        }
    }
}

/// Pose measurement noise (motion-capture like).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseSensorConfig {
    pub rate: f64,
    pub position_std: f64,
    pub attitude_std: f64,
}

impl Default for PoseSensorConfig {
    fn default() -> Self {
        Self {
            rate: 100.0,
            position_std: 1e-3,
            attitude_std: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PoseSensor {
    cfg: PoseSensorConfig,
    rng: ChaCha8Rng,
}

impl PoseSensor {
    pub fn new(cfg: PoseSensorConfig, seed: u64) -> Self {
        Self {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn period(&self) -> f64 {
        1.0 / self.cfg.rate
    }

    pub fn sample(&mut self, state: &QuadState) -> PoseMeasurement {
        let dtheta = gaussian3(&mut self.rng, self.cfg.attitude_std);
        PoseMeasurement {
            t: state.t,
            p: state.p + gaussian3(&mut self.rng, self.cfg.position_std),
            q: state.q * UnitQuaternion::from_scaled_axis(dtheta),
            position_std: self.cfg.position_std.max(1e-6),
            attitude_std: self.cfg.attitude_std.max(1e-6),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_imu_at_rest_reads_gravity() {
        let mut imu = ImuSimulator::new(ImuConfig::noiseless(500.0), 9.81, 1);
        let s = imu.sample(&QuadState::default());
        assert_eq!(s.gyro, Vector3::zeros());
        assert_eq!(s.accel, Vector3::new(0.0, 0.0, 9.81));
    }

    #[test]
    fn same_seed_same_samples() {
        let mut a = ImuSimulator::new(ImuConfig::default(), 9.81, 42);
        let mut b = ImuSimulator::new(ImuConfig::default(), 9.81, 42);
        let s = QuadState::default();
        for _ in 0..10 {
            assert_eq!(a.sample(&s), b.sample(&s));
        }
    }
}
