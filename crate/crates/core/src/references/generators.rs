//! Closed-curve trajectories (circle, lemniscate) flown at constant speed.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{flatness_setpoint, FlatOutput, ReferenceError, SampledTrajectory};
use crate::jet::Jet;
use crate::model::QuadrotorModel;

/// Sampling rate of generated trajectories [Hz].
pub const SAMPLE_RATE: f64 = 100.0;

const ARC_PANELS: usize = 256;
// 8-point Gauss-Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoopShape {
    /// `size` is the radius.
    Circle,
    /// Bernoulli lemniscate; `size` is the half-width (max |x|).
    Lemniscate,
}

impl LoopShape {
    /// Heading used when a loop does not set one.
    ///
    /// At the lemniscate's lobe tips the thrust axis tilts by roughly 70°
    /// along the long (x) axis. Pointing the body x axis along that tilt
    /// brings the attitude close to the heading singularity, where holding
    /// yaw costs a large yaw torque; flying crosswise avoids it.
    pub fn default_yaw(self) -> f64 {
        match self {
            LoopShape::Circle => 0.0,
            LoopShape::Lemniscate => FRAC_PI_2,
        }
    }
}

/// A closed horizontal curve flown at constant speed and height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopTrajectory {
    pub shape: LoopShape,
    #[serde(default)]
    pub center: [f64; 2],
    pub size: f64,
    pub speed: f64,
    pub z: f64,
    #[serde(default = "one")]
    pub laps: f64,
    /// Duration of the cosine speed ramps at start and end; 0 starts and
    /// ends at cruise speed.
    #[serde(default)]
    pub ramp_time: f64,
    /// Constant heading. When unset, circles fly at yaw 0 and lemniscates
    /// at yaw π/2, see [`LoopShape::default_yaw`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw: Option<f64>,
}

fn one() -> f64 {
    1.0
}

/// Circle of `radius` at height `z`, starting at angle 0 and flown
/// counter-clockwise.
pub fn generate_circle(
    center: [f64; 2],
    radius: f64,
    speed: f64,
    z: f64,
    laps: f64,
    model: &QuadrotorModel,
) -> Result<SampledTrajectory, ReferenceError> {
    LoopTrajectory {
        shape: LoopShape::Circle,
        center,
        size: radius,
        speed,
        z,
        laps,
        ramp_time: 0.0,
        yaw: None,
    }
    .generate(model)
}

/// Bernoulli lemniscate with half-width `amplitude`, arc-length
/// parameterised so the speed is constant.
pub fn generate_lemniscate(
    center: [f64; 2],
    amplitude: f64,
    speed: f64,
    z: f64,
    laps: f64,
    model: &QuadrotorModel,
) -> Result<SampledTrajectory, ReferenceError> {
    LoopTrajectory {
        shape: LoopShape::Lemniscate,
        center,
        size: amplitude,
        speed,
        z,
        laps,
        ramp_time: 0.0,
        yaw: None,
    }
    .generate(model)
}

impl LoopTrajectory {
    pub fn yaw(&self) -> f64 {
        self.yaw.unwrap_or(self.shape.default_yaw())
    }

    pub fn validate(&self) -> Result<(), ReferenceError> {
        let fields = [self.size, self.speed, self.z, self.laps, self.ramp_time, self.yaw(), self.center[0], self.center[1]];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(ReferenceError::InvalidArgument("trajectory parameters must be finite".into()));
        }
        if !(self.size > 0.0) {
            return Err(ReferenceError::InvalidArgument("size (radius/amplitude) must be > 0".into()));
        }
        if !(self.speed > 0.0) {
            return Err(ReferenceError::InvalidArgument("speed must be > 0".into()));
        }
        if !(self.laps > 0.0) || self.ramp_time < 0.0 {
            return Err(ReferenceError::InvalidArgument("laps must be > 0 and ramp_time >= 0".into()));
        }
        Ok(())
    }

    /// Samples the curve at [`SAMPLE_RATE`] and maps every sample through the
    /// flatness transform.
    pub fn generate(&self, model: &QuadrotorModel) -> Result<SampledTrajectory, ReferenceError> {
        self.validate()?;
        let curve = Curve::new(self.shape, self.size);
        let total_arc = self.laps * curve.lap_length;
        if total_arc / self.speed < self.ramp_time {
            return Err(ReferenceError::InvalidArgument(
                "trajectory too short for the requested speed ramps".into(),
            ));
        }
        let duration = total_arc / self.speed + self.ramp_time;
        let dt = 1.0 / SAMPLE_RATE;
        let n = (duration * SAMPLE_RATE + 1e-9).floor() as usize;
        let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        if duration - times[n] > 1e-9 {
            times.push(duration);
        }
        let profile = SpeedProfile {
            speed: self.speed,
            ramp: self.ramp_time,
            duration,
            total_arc,
        };
        let setpoints = times
            .into_iter()
            .map(|t| flatness_setpoint(&self.flat_output(&curve, &profile, t), model))
            .collect::<Result<Vec<_>, _>>()?;
        SampledTrajectory::new(setpoints)
    }

    fn flat_output(&self, curve: &Curve, profile: &SpeedProfile, t: f64) -> FlatOutput {
        let (arc, speed) = profile.at(t);
        // Taylor-expand θ(t) from dθ/dt = speed(t) / |dC/dθ|(θ).
        let mut theta: Jet<5> = Jet::constant(curve.param_from_arc(arc));
        for k in 0..4 {
            let rate = speed / curve.speed_norm(theta);
            theta.0[k + 1] = rate.0[k] / (k + 1) as f64;
        }
        let (x, y) = curve.point(theta);
        let d = |k: usize| {
            let base = if k == 0 {
                Vector3::new(self.center[0], self.center[1], self.z)
            } else {
                Vector3::zeros()
            };
            base + Vector3::new(x.derivative(k), y.derivative(k), 0.0)
        };
        FlatOutput {
            t,
            p: d(0),
            v: d(1),
            a: d(2),
            j: d(3),
            s: d(4),
            yaw: self.yaw(),
            yaw_rate: 0.0,
            yaw_acc: 0.0,
        }
    }
}

struct SpeedProfile {
    speed: f64,
    ramp: f64,
    duration: f64,
    total_arc: f64,
}

impl SpeedProfile {
    /// Arc length travelled and the speed jet at time `t`.
    fn at(&self, t: f64) -> (f64, Jet<5>) {
        let v = self.speed;
        let r = self.ramp;
        if r > 0.0 && t < r {
            let arc = 0.5 * v * (t - r / PI * (PI * t / r).sin());
            let tj: Jet<5> = Jet::from_derivatives(&[t, 1.0]);
            let (_, c) = (tj * (PI / r)).sin_cos();
            return (arc, (-c + 1.0) * (0.5 * v));
        }
        if r > 0.0 && t > self.duration - r {
            let rem = self.duration - t;
            let arc = self.total_arc - 0.5 * v * (rem - r / PI * (PI * rem / r).sin());
            let remj: Jet<5> = Jet::from_derivatives(&[rem, -1.0]);
            let (_, c) = (remj * (PI / r)).sin_cos();
            return (arc, (-c + 1.0) * (0.5 * v));
        }
        let arc = if r > 0.0 { 0.5 * v * r + v * (t - r) } else { v * t };
        (arc, Jet::constant(v))
    }
}

struct Curve {
    shape: LoopShape,
    size: f64,
    lap_length: f64,
    /// Cumulative arc length at each panel boundary (lemniscate only).
    table: Vec<f64>,
}

impl Curve {
    fn new(shape: LoopShape, size: f64) -> Self {
        match shape {
            LoopShape::Circle => Self {
                shape,
                size,
                lap_length: TAU * size,
                table: Vec::new(),
            },
            LoopShape::Lemniscate => {
                let mut c = Self {
                    shape,
                    size,
                    lap_length: 0.0,
                    table: vec![0.0; ARC_PANELS + 1],
                };
                let h = TAU / ARC_PANELS as f64;
                for i in 0..ARC_PANELS {
                    let a = i as f64 * h;
                    c.table[i + 1] = c.table[i] + c.arc_between(a, a + h);
                }
                c.lap_length = c.table[ARC_PANELS];
                c
            }
        }
    }

    fn speed_norm_scalar(&self, theta: f64) -> f64 {
        self.speed_norm(Jet::<1>::constant(theta)).value()
    }

    /// |dC/dθ|.
    fn speed_norm<const N: usize>(&self, theta: Jet<N>) -> Jet<N> {
        match self.shape {
            LoopShape::Circle => Jet::constant(self.size),
            LoopShape::Lemniscate => {
                let (s, _) = theta.sin_cos();
                Jet::constant(self.size) / (s * s + 1.0).sqrt()
            }
        }
    }

    fn point<const N: usize>(&self, theta: Jet<N>) -> (Jet<N>, Jet<N>) {
        let (s, c) = theta.sin_cos();
        match self.shape {
            LoopShape::Circle => (c * self.size, s * self.size),
            LoopShape::Lemniscate => {
                let den = s * s + 1.0;
                ((c * self.size) / den, (s * c * self.size) / den)
            }
        }
    }

    fn arc_between(&self, a: f64, b: f64) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        GL_NODES
            .iter()
            .zip(GL_WEIGHTS.iter())
            .map(|(x, w)| w * self.speed_norm_scalar(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Curve parameter θ at arc length `arc` from θ = 0.
    fn param_from_arc(&self, arc: f64) -> f64 {
        match self.shape {
            LoopShape::Circle => arc / self.size,
            LoopShape::Lemniscate => {
                let laps = (arc / self.lap_length).floor();
                let rem = arc - laps * self.lap_length;
                let h = TAU / ARC_PANELS as f64;
                let i = self.table.partition_point(|&s| s <= rem).saturating_sub(1).min(ARC_PANELS - 1);
                let a = i as f64 * h;
                let mut theta = a + h * (rem - self.table[i]) / (self.table[i + 1] - self.table[i]);
                for _ in 0..20 {
                    let err = self.table[i] + self.arc_between(a, theta) - rem;
                    let step = err / self.speed_norm_scalar(theta);
                    theta -= step;
                    if step.abs() < 1e-15 {
                        break;
                    }
                }
                laps * TAU + theta
            }
        }
    }
}
