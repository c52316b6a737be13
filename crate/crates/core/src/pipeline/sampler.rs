use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::references::SampledTrajectory;
use crate::state::Setpoint;

/// How the sampler tracks progress along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// Progress is the time since the trajectory started.
    #[default]
    Time,
    /// Progress follows the closest point to the vehicle.
    Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// Search window of the position sampler [s of trajectory time].
    pub window: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            kind: SamplerKind::Time,
            window: 0.3,
        }
    }
}

/// `n` setpoints at `t, t + dt_h, …` (absolute trajectory time).
pub fn sample_time_based(traj: &SampledTrajectory, t: f64, n: usize, dt_h: f64) -> Vec<Setpoint> {
    (0..n).map(|k| traj.sample(t + k as f64 * dt_h)).collect()
}

/// Closest-point progress search over `[previous_progress, previous_progress + window]`.
///
/// Progress is measured from the trajectory start, so it lives in
/// `[0, duration]`. The earliest minimiser wins ties, and the result never
/// moves backwards. Returns the horizon sampled from the new progress.
pub fn sample_position_based(
    traj: &SampledTrajectory,
    current_p: &Vector3<f64>,
    previous_progress: f64,
    n: usize,
    dt_h: f64,
    window: f64,
) -> (Vec<Setpoint>, f64) {
    let progress = closest_progress(traj, current_p, previous_progress, window);
    (sample_time_based(traj, traj.t_start() + progress, n, dt_h), progress)
}

fn closest_progress(traj: &SampledTrajectory, p: &Vector3<f64>, previous: f64, window: f64) -> f64 {
    let t0 = traj.t_start();
    let lo = previous.clamp(0.0, traj.duration()) + t0;
    let hi = (lo + window.max(0.0)).min(traj.t_end());
    let pts = traj.setpoints();
    let dist2 = |t: f64| (traj.position_at(t) - p).norm_squared();

    // Candidate times: the window ends plus every stored sample inside.
    let first = pts.partition_point(|s| s.state.t <= lo);
    let mut best_t = lo;
    let mut best = dist2(lo);
    for s in pts[first..].iter().take_while(|s| s.state.t < hi) {
        let d = (s.state.p - p).norm_squared();
        if d < best {
            best = d;
            best_t = s.state.t;
        }
    }
    if dist2(hi) < best {
        best = dist2(hi);
        best_t = hi;
    }

    // Refine on the two segments adjacent to the best candidate by
    // projecting onto each straight segment.
    let k = pts.partition_point(|s| s.state.t <= best_t);
    for seg in [k.saturating_sub(1), k] {
        if seg + 1 >= pts.len() {
            continue;
        }
        let (a, b) = (&pts[seg].state, &pts[seg + 1].state);
        let ab = b.p - a.p;
        let len2 = ab.norm_squared();
        if len2 == 0.0 {
            continue;
        }
        let u = ((p - a.p).dot(&ab) / len2).clamp(0.0, 1.0);
        let t = (a.t + u * (b.t - a.t)).clamp(lo, hi);
        let d = dist2(t);
        if d < best || (d == best && t < best_t) {
            best = d;
            best_t = t;
        }
    }
    best_t - t0
}
