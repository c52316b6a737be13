//! Thrust step on a simulated test stand, and the first-order fit that
//! recovers the motor time constant and the command-to-onset delay.

use nalgebra::{Vector3, Vector4};

use super::HarnessError;
use crate::model::QuadrotorModel;
use crate::simulator::{SimConfig, Simulator};
use crate::state::{Command, QuadState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepExperiment {
    /// Command transport latency [s].
    pub latency: f64,
    /// Collective thrust before the step [N].
    pub baseline: f64,
    /// Collective thrust after the step [N].
    pub target: f64,
    /// Time the step command is sent [s].
    pub t_command: f64,
    pub duration: f64,
    pub dt: f64,
}

impl Default for StepExperiment {
    fn default() -> Self {
        Self {
            latency: 0.0,
            baseline: 4.0,
            target: 12.0,
            t_command: 0.1,
            duration: 0.6,
            dt: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResponse {
    /// Fitted first-order time constant [s].
    pub time_constant: f64,
    /// Fitted dead time, measured from the command timestamp [s].
    pub onset_delay: f64,
    /// Time from the command until the force first moved by more than 1 %
    /// of the step [s]. Sampled, so it lags the true onset by up to one step
    /// plus the rise to 1 %.
    pub threshold_delay: f64,
    /// Measured collective force `(t, F)` at every step.
    pub force: Vec<(f64, f64)>,
}

/// Commands a collective-thrust step on a fixed vehicle and fits a first
/// order response with dead time to the measured force.
///
/// The force is mapped back to rotor speed through the thrust curve, where
/// the motor is first order. On `ln(1 − progress)` the response is a line
/// with slope `−1/τ` that crosses zero at the onset. Samples between 5 % and
/// 95 % progress enter the least-squares fit.
pub fn thrust_step_response(model: &QuadrotorModel, exp: &StepExperiment) -> Result<StepResponse, HarnessError> {
    let valid = exp.latency >= 0.0
        && exp.dt > 0.0
        && exp.t_command >= 0.0
        && exp.duration > exp.t_command
        && exp.baseline > 4.0 * model.f_min
        && exp.target < 4.0 * model.f_max
        && exp.target > exp.baseline;
    if !valid {
        return Err(HarnessError::Usage(format!("invalid step experiment {exp:?}")));
    }
    let cfg = SimConfig {
        dt: exp.dt,
        latency: exp.latency,
        test_stand: true,
        ..SimConfig::default()
    };
    let rotor = |collective: f64| Vector4::repeat(collective / 4.0);
    let initial = QuadState {
        f: rotor(exp.baseline),
        fd: rotor(exp.baseline),
        ..QuadState::at_rest(0.0, Vector3::zeros(), 0.0)
    };
    let mut sim = Simulator::new(*model, cfg, initial)?;
    let send_step = (exp.t_command / exp.dt).round() as u64;
    let steps = (exp.duration / exp.dt).round() as u64;
    let mut force = vec![(0.0, exp.baseline)];
    for k in 0..steps {
        if k == send_step {
            sim.push_command(Command::thrusts(sim.time(), rotor(exp.target)));
        }
        let s = sim.step()?;
        force.push((s.quad.t, s.quad.f.sum()));
    }

    let t_cmd = send_step as f64 * exp.dt;
    let speed = |f: f64| model.speed_from_thrust(f / 4.0);
    let (w0, w1) = (speed(exp.baseline), speed(exp.target));
    let progress = |f: f64| (speed(f) - w0) / (w1 - w0);

    let pts: Vec<(f64, f64)> = force
        .iter()
        .filter(|(_, f)| (0.05..=0.95).contains(&progress(*f)))
        .map(|&(t, f)| (t, (1.0 - progress(f)).ln()))
        .collect();
    if pts.len() < 3 {
        return Err(HarnessError::Metrics("too few samples in the rise to fit a first-order response".into()));
    }
    let n = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(t, y)| (t - mean_t) * (y - mean_y)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - mean_t).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_t;
    let tau = -1.0 / slope;
    let onset = intercept * tau;

    let threshold = exp.baseline + 0.01 * (exp.target - exp.baseline);
    let t_threshold = force
        .iter()
        .find(|(_, f)| *f > threshold)
        .map(|(t, _)| *t)
        .ok_or_else(|| HarnessError::Metrics("force never left its baseline".into()))?;

    Ok(StepResponse {
        time_constant: tau,
        onset_delay: onset - t_cmd,
        threshold_delay: t_threshold - t_cmd,
        force,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_latency_onset_is_the_command_step() {
        let m = QuadrotorModel::default();
        let r = thrust_step_response(&m, &StepExperiment::default()).unwrap();
        assert!((r.time_constant - m.motor_tc).abs() < 1e-9, "{}", r.time_constant);
        assert!(r.onset_delay.abs() < 1e-9, "{}", r.onset_delay);
        assert!(r.threshold_delay > 0.0 && r.threshold_delay <= 2e-3 + 1e-12);
    }

    #[test]
    fn rejects_downward_step() {
        let exp = StepExperiment {
            target: 2.0,
            ..StepExperiment::default()
        };
        assert!(thrust_step_response(&QuadrotorModel::default(), &exp).is_err());
    }
}
