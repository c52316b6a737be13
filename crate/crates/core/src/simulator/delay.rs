use std::collections::VecDeque;

use crate::state::Command;

/// Command transport with a fixed latency, quantised to the simulation step.
///
/// A command sent at time `t` is released at the first step whose start
/// time is at least `t + latency`. Between releases the last released
/// command is held.
#[derive(Debug, Clone)]
pub struct DelayLine {
    latency: f64,
    dt: f64,
    queue: VecDeque<(u64, Command)>,
    held: Option<Command>,
}

impl DelayLine {
    pub fn new(latency: f64, dt: f64) -> Self {
        assert!(latency >= 0.0 && dt > 0.0, "latency must be >= 0 and dt > 0");
        Self {
            latency,
            dt,
            queue: VecDeque::new(),
            held: None,
        }
    }

    pub fn latency(&self) -> f64 {
        self.latency
    }

    /// Step index at which a command sent at `send_time` is released.
    pub fn release_step(&self, send_time: f64) -> u64 {
        ((send_time + self.latency) / self.dt - 1e-9).ceil().max(0.0) as u64
    }

    pub fn push(&mut self, cmd: Command, send_time: f64) {
        let step = self.release_step(send_time);
        self.queue.push_back((step, cmd));
    }

    /// Releases every command due at `step`, in send order. Returns the
    /// newest released command, if any.
    pub fn pop(&mut self, step: u64) -> Option<Command> {
        let mut released = None;
        while let Some(&(due, cmd)) = self.queue.front() {
            if due > step {
                break;
            }
            self.queue.pop_front();
            released = Some(cmd);
        }
        if released.is_some() {
            self.held = released;
        }
        released
    }

    /// Last released command (zero-order hold).
    pub fn held(&self) -> Option<&Command> {
        self.held.as_ref()
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector4;
    use proptest::prelude::*;

    fn cmd(t: f64) -> Command {
        Command::thrusts(t, Vector4::repeat(t))
    }

    #[test]
    fn forty_ms_is_forty_steps() {
        let mut d = DelayLine::new(0.040, 0.001);
        d.push(cmd(0.0), 0.0);
        for step in 0..40 {
            assert!(d.pop(step).is_none());
        }
        assert_eq!(d.pop(40), Some(cmd(0.0)));
    }

    #[test]
    fn zero_latency_applies_next_step() {
        let mut d = DelayLine::new(0.0, 0.001);
        d.push(cmd(0.01), 0.01);
        assert!(d.pop(9).is_none());
        assert_eq!(d.pop(10), Some(cmd(0.01)));
        assert_eq!(d.held(), Some(&cmd(0.01)));
        assert!(d.pop(11).is_none());
        assert_eq!(d.held(), Some(&cmd(0.01)));
    }

    #[test]
    fn fractional_latency_rounds_up() {
        let d = DelayLine::new(0.04015, 0.001);
        assert_eq!(d.release_step(0.0), 41);
    }

    proptest! {
        #[test]
        fn preserves_order_and_quantisation(
            latency_ms in 0u32..100,
            gaps in proptest::collection::vec(1u64..20, 1..40),
        ) {
            let latency = latency_ms as f64 * 1e-3;
            let mut d = DelayLine::new(latency, 1e-3);
            let mut send_steps = Vec::new();
            let mut s = 0u64;
            for g in &gaps {
                s += g;
                send_steps.push(s);
                d.push(cmd(s as f64), s as f64 * 1e-3);
            }
            let mut released = Vec::new();
            for step in 0..(s + 200) {
                if let Some(c) = d.pop(step) {
                    released.push((step, c.t));
                }
            }
            prop_assert_eq!(released.len(), send_steps.len());
            for ((step, t), sent) in released.iter().zip(&send_steps) {
                prop_assert_eq!(*t, *sent as f64);
                prop_assert_eq!(*step, sent + latency_ms as u64);
            }
        }
    }
}
