use nalgebra::Vector3;

use super::ReferenceError;
use crate::state::{Actuation, Command, QuadState, Setpoint};

/// Time-ordered list of setpoints with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrajectory {
    setpoints: Vec<Setpoint>,
}

impl SampledTrajectory {
    pub fn new(setpoints: Vec<Setpoint>) -> Result<Self, ReferenceError> {
        if setpoints.len() < 2 {
            return Err(ReferenceError::InvalidArgument(
                "a sampled trajectory needs at least 2 setpoints".into(),
            ));
        }
        for (i, pair) in setpoints.windows(2).enumerate() {
            if !(pair[1].state.t > pair[0].state.t) {
                return Err(ReferenceError::InvalidArgument(format!(
                    "timestamps must strictly increase (setpoint {} at t = {} after t = {})",
                    i + 1,
                    pair[1].state.t,
                    pair[0].state.t
                )));
            }
        }
        if let Some(i) = setpoints.iter().position(|s| !s.state.is_valid() || !s.input.is_finite()) {
            return Err(ReferenceError::InvalidArgument(format!("setpoint {i} is not finite")));
        }
        Ok(Self { setpoints })
    }

    pub fn setpoints(&self) -> &[Setpoint] {
        &self.setpoints
    }

    pub fn len(&self) -> usize {
        self.setpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.setpoints.is_empty()
    }

    pub fn t_start(&self) -> f64 {
        self.setpoints[0].state.t
    }

    pub fn t_end(&self) -> f64 {
        self.setpoints[self.setpoints.len() - 1].state.t
    }

    pub fn duration(&self) -> f64 {
        self.t_end() - self.t_start()
    }

    pub fn first(&self) -> &Setpoint {
        &self.setpoints[0]
    }

    pub fn last(&self) -> &Setpoint {
        &self.setpoints[self.setpoints.len() - 1]
    }

    /// Index `k` with `t_k <= t < t_{k+1}`, clamped to the valid range.
    fn segment(&self, t: f64) -> usize {
        let idx = self.setpoints.partition_point(|s| s.state.t <= t);
        idx.saturating_sub(1).min(self.setpoints.len() - 2)
    }

    /// Position at time `t`, linearly interpolated and clamped.
    pub fn position_at(&self, t: f64) -> Vector3<f64> {
        self.sample(t).state.p
    }

    /// Setpoint at time `t`: linear interpolation of every field, slerp of
    /// the attitude. Times outside the trajectory clamp to the end points,
    /// re-stamped with `t`.
    pub fn sample(&self, t: f64) -> Setpoint {
        let restamp = |sp: &Setpoint| {
            let mut s = *sp;
            s.state.t = t;
            s.input.t = t;
            s
        };
        if t <= self.t_start() {
            return restamp(self.first());
        }
        if t >= self.t_end() {
            return restamp(self.last());
        }
        let k = self.segment(t);
        let (a, b) = (&self.setpoints[k], &self.setpoints[k + 1]);
        if t == a.state.t {
            return *a;
        }
        let alpha = (t - a.state.t) / (b.state.t - a.state.t);
        let state = interpolate_state(&a.state, &b.state, alpha, t);
        let input = match (a.input.actuation, b.input.actuation) {
            (Actuation::Thrusts(fa), Actuation::Thrusts(fb)) => Command::thrusts(t, fa.lerp(&fb, alpha)),
            (
                Actuation::CollectiveThrustBodyrate {
                    collective_thrust: ca,
                    bodyrate: wa,
                },
                Actuation::CollectiveThrustBodyrate {
                    collective_thrust: cb,
                    bodyrate: wb,
                },
            ) => Command::collective_bodyrate(t, ca + alpha * (cb - ca), wa.lerp(&wb, alpha)),
            _ => Command { t, ..a.input },
        };
        Setpoint { state, input }
    }
}

pub(crate) fn interpolate_state(a: &QuadState, b: &QuadState, alpha: f64, t: f64) -> QuadState {
    QuadState {
        t,
        p: a.p.lerp(&b.p, alpha),
        q: a.q.try_slerp(&b.q, alpha, 1e-12).unwrap_or(a.q),
        v: a.v.lerp(&b.v, alpha),
        w: a.w.lerp(&b.w, alpha),
        a: a.a.lerp(&b.a, alpha),
        tau: a.tau.lerp(&b.tau, alpha),
        j: a.j.lerp(&b.j, alpha),
        s: a.s.lerp(&b.s, alpha),
        bw: a.bw.lerp(&b.bw, alpha),
        ba: a.ba.lerp(&b.ba, alpha),
        fd: a.fd.lerp(&b.fd, alpha),
        f: a.f.lerp(&b.f, alpha),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> SampledTrajectory {
        let sps = (0..5)
            .map(|k| {
                let t = k as f64 * 0.1;
                Setpoint::from_state(QuadState::at_rest(t, Vector3::new(t, 0.0, 1.0), 0.0))
            })
            .collect();
        SampledTrajectory::new(sps).unwrap()
    }

    #[test]
    fn rejects_short_or_unordered() {
        let s = Setpoint::from_state(QuadState::default());
        assert!(SampledTrajectory::new(vec![s]).is_err());
        assert!(SampledTrajectory::new(vec![s, s]).is_err());
    }

    #[test]
    fn exact_sample_and_midpoint() {
        let tr = line();
        let t2 = tr.setpoints()[2].state.t;
        assert_eq!(tr.sample(t2), tr.setpoints()[2]);
        let mid = tr.sample(0.15);
        assert!((mid.state.p.x - 0.15).abs() < 1e-12);
    }

    #[test]
    fn clamps_outside() {
        let tr = line();
        assert_eq!(tr.sample(-1.0).state.p, tr.first().state.p);
        assert_eq!(tr.sample(9.0).state.p, tr.last().state.p);
        assert_eq!(tr.sample(9.0).state.t, 9.0);
    }
}
