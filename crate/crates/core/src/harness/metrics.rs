use std::fmt;
use std::io::{BufRead, BufReader, Read};

use nalgebra::{Quaternion, UnitQuaternion, Vector3, Vector4};

use super::HarnessError;
use crate::pipeline::SolverStats;
use crate::references::{SampledTrajectory, TRAJECTORY_HEADER};
use crate::state::QuadState;

/// Header of the per-step state log: the trajectory columns plus rotor
/// speeds.
pub fn state_log_header() -> String {
    format!("{TRAJECTORY_HEADER},m1,m2,m3,m4")
}

const STATE_LOG_COLUMNS: usize = 31;

/// Tracking and flight statistics of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    /// Logged states paired with a reference sample.
    pub samples: usize,
    /// `sqrt(mean ‖p − p_ref‖²)` [m].
    pub rmse: f64,
    pub max_error: f64,
    /// Per-axis RMSE [m].
    pub rmse_axis: Vector3<f64>,
    pub max_speed: f64,
    pub max_acceleration: f64,
    pub guard_events: usize,
    pub solver: SolverStats,
}

/// Time-based tracking error of a state log against a reference.
///
/// Each logged state inside the reference's time span is paired with the
/// reference position interpolated at the same time. Speed and acceleration
/// maxima cover the whole log.
pub fn compute_rmse(states: &[QuadState], reference: &SampledTrajectory) -> Result<MetricsReport, HarnessError> {
    if states.is_empty() {
        return Err(HarnessError::Metrics("state log is empty".into()));
    }
    let tol = 1e-9;
    let (t0, t1) = (reference.t_start() - tol, reference.t_end() + tol);
    let mut sum_sq = Vector3::zeros();
    let mut max_error: f64 = 0.0;
    let mut samples = 0;
    for s in states.iter().filter(|s| s.t >= t0 && s.t <= t1) {
        let e = s.p - reference.position_at(s.t);
        sum_sq += e.component_mul(&e);
        max_error = max_error.max(e.norm());
        samples += 1;
    }
    if samples == 0 {
        return Err(HarnessError::Metrics(format!(
            "no temporal overlap: log spans [{}, {}] s, reference spans [{}, {}] s",
            states[0].t,
            states[states.len() - 1].t,
            reference.t_start(),
            reference.t_end()
        )));
    }
    let mean = sum_sq / samples as f64;
    Ok(MetricsReport {
        samples,
        rmse: mean.sum().sqrt(),
        max_error,
        rmse_axis: mean.map(f64::sqrt),
        max_speed: states.iter().map(|s| s.v.norm()).fold(0.0, f64::max),
        max_acceleration: states.iter().map(|s| s.a.norm()).fold(0.0, f64::max),
        guard_events: 0,
        solver: SolverStats::default(),
    })
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples            {}", self.samples)?;
        writeln!(f, "position RMSE      {:.6} m", self.rmse)?;
        writeln!(
            f,
            "per-axis RMSE      x {:.6}  y {:.6}  z {:.6} m",
            self.rmse_axis.x, self.rmse_axis.y, self.rmse_axis.z
        )?;
        writeln!(f, "max position error {:.6} m", self.max_error)?;
        writeln!(f, "max speed          {:.4} m/s", self.max_speed)?;
        writeln!(f, "max acceleration   {:.4} m/s^2", self.max_acceleration)?;
        writeln!(f, "guard events       {}", self.guard_events)?;
        let s = &self.solver;
        writeln!(f, "control cycles     {}", s.cycles)?;
        if s.mpc_solves > 0 {
            writeln!(
                f,
                "mpc                {} solves, {:.2} iterations/solve, {} warnings",
                s.mpc_solves,
                s.mpc_iterations as f64 / s.mpc_solves as f64,
                s.mpc_warnings
            )?;
        }
        writeln!(
            f,
            "indi               {} fallbacks, {} clamped cycles",
            s.indi_fallbacks, s.indi_clamps
        )?;
        write!(
            f,
            "other              {} singularities, {} rejected measurements",
            s.singularities, s.rejected_measurements
        )
    }
}

/// Reads a state log written by the harness back into states (rotor speeds
/// are dropped). Errors carry the 1-based line number.
pub fn read_state_log<R: Read>(input: R) -> Result<Vec<QuadState>, HarnessError> {
    let err = |line: usize, message: String| HarnessError::Metrics(format!("line {line}: {message}"));
    let mut lines = BufReader::new(input).lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| err(1, e.to_string()))?
        .ok_or_else(|| err(1, "empty file, expected header".into()))?;
    if header.trim_end() != state_log_header() {
        return Err(err(1, "malformed state log header".into()));
    }
    let mut states = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line.map_err(|e| err(line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let v = line
            .trim_end()
            .split(',')
            .enumerate()
            .map(|(i, x)| x.trim().parse::<f64>().map_err(|e| err(line_no, format!("column {}: {e}", i + 1))))
            .collect::<Result<Vec<_>, _>>()?;
        if v.len() != STATE_LOG_COLUMNS {
            return Err(err(line_no, format!("expected {STATE_LOG_COLUMNS} columns, found {}", v.len())));
        }
        let v3 = |i: usize| Vector3::new(v[i], v[i + 1], v[i + 2]);
        let f = Vector4::new(v[23], v[24], v[25], v[26]);
        states.push(QuadState {
            t: v[0],
            p: v3(1),
            q: UnitQuaternion::new_normalize(Quaternion::new(v[4], v[5], v[6], v[7])),
            v: v3(8),
            w: v3(11),
            a: v3(14),
            j: v3(17),
            s: v3(20),
            f,
            fd: f,
            ..QuadState::default()
        });
    }
    Ok(states)
}
