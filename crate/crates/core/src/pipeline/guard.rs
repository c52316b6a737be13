use crate::state::QuadState;

use super::config::GuardConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardStatus {
    Ok,
    Violation,
}

/// Stateless box test. The box is closed: positions on its boundary are
/// inside. Non-finite states always violate.
pub fn guard_check(state: &QuadState, cfg: &GuardConfig) -> GuardStatus {
    let finite = state.is_valid();
    let inside = state
        .p
        .iter()
        .zip(cfg.box_min.iter().zip(cfg.box_max.iter()))
        .all(|(p, (lo, hi))| *p >= *lo && *p <= *hi);
    if finite && inside {
        GuardStatus::Ok
    } else {
        GuardStatus::Violation
    }
}

/// Latching guard. Once violated it stays violated until [`Guard::reset`].
#[derive(Debug, Clone)]
pub struct Guard {
    cfg: GuardConfig,
    latched: bool,
}

/// Result of one guard evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GuardVerdict {
    pub status: GuardStatus,
    /// True only on the call that latched the violation.
    pub new_violation: bool,
}

impl Guard {
    pub fn new(cfg: GuardConfig) -> Self {
        Self { cfg, latched: false }
    }

    pub fn config(&self) -> &GuardConfig {
        &self.cfg
    }

    pub fn is_latched(&self) -> bool {
        self.latched
    }

    pub fn check(&mut self, state: &QuadState) -> GuardVerdict {
        if !self.cfg.enabled {
            return GuardVerdict {
                status: GuardStatus::Ok,
                new_violation: false,
            };
        }
        if self.latched {
            return GuardVerdict {
                status: GuardStatus::Violation,
                new_violation: false,
            };
        }
        let status = guard_check(state, &self.cfg);
        self.latched = status == GuardStatus::Violation;
        GuardVerdict {
            status,
            new_violation: self.latched,
        }
    }

    pub fn reset(&mut self) {
        self.latched = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn cfg() -> GuardConfig {
        GuardConfig {
            box_min: Vector3::new(-1.0, -1.0, 0.0),
            box_max: Vector3::new(1.0, 1.0, 2.0),
            ..GuardConfig::default()
        }
    }

    fn at(p: Vector3<f64>) -> QuadState {
        QuadState { p, ..QuadState::default() }
    }

    #[test]
    fn inside_and_boundary_ok() {
        assert_eq!(guard_check(&at(Vector3::new(0.0, 0.0, 1.0)), &cfg()), GuardStatus::Ok);
        assert_eq!(guard_check(&at(Vector3::new(1.0, -1.0, 2.0)), &cfg()), GuardStatus::Ok);
    }

    #[test]
    fn just_outside_violates() {
        assert_eq!(guard_check(&at(Vector3::new(0.0, 0.0, 2.001)), &cfg()), GuardStatus::Violation);
    }

    #[test]
    fn nan_violates() {
        assert_eq!(guard_check(&at(Vector3::new(f64::NAN, 0.0, 1.0)), &cfg()), GuardStatus::Violation);
    }

    #[test]
    fn latches_until_reset() {
        let mut g = Guard::new(cfg());
        let v = g.check(&at(Vector3::new(5.0, 0.0, 1.0)));
        assert!(v.new_violation);
        let v = g.check(&at(Vector3::zeros()));
        assert_eq!(v.status, GuardStatus::Violation);
        assert!(!v.new_violation);
        g.reset();
        assert_eq!(g.check(&at(Vector3::zeros())).status, GuardStatus::Ok);
    }
}
