use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::metrics::{compute_rmse, state_log_header, MetricsReport};
use super::HarnessError;
use crate::pipeline::{
    command_log_row, EstimatorConfig, Pilot, PilotEvent, PilotInputs, SimBridge, COMMAND_LOG_HEADER,
};
use crate::references::{join_row, state_columns, Reference, SampledTrajectory};
use crate::simulator::{ImuSimulator, PoseSensor, SimConfig, SimState, Simulator};
use crate::state::{Command, QuadState};

/// Everything a run produced. Logs are rendered on demand from the trace.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub metrics: MetricsReport,
    /// Simulator state after every step, starting with the initial state.
    pub trace: Vec<SimState>,
    /// Commands in the order they entered the delay line.
    pub commands: Vec<Command>,
    pub events: Vec<PilotEvent>,
    pub reference: SampledTrajectory,
    /// The pilot ended the run on its backup pipeline.
    pub on_backup: bool,
    /// Largest |‖q‖ − 1| after any simulator step.
    pub max_quaternion_norm_deviation: f64,
}

impl ExperimentOutput {
    pub fn guard_aborted(&self) -> bool {
        self.metrics.guard_events > 0
    }

    pub fn states(&self) -> impl Iterator<Item = &QuadState> {
        self.trace.iter().map(|s| &s.quad)
    }

    pub fn final_state(&self) -> &SimState {
        self.trace.last().expect("trace holds at least the initial state")
    }

    pub fn state_log_csv(&self) -> String {
        let mut out = state_log_header();
        out.push('\n');
        for s in &self.trace {
            let cols = state_columns(&s.quad, &s.quad.f);
            out.push_str(&join_row(cols.into_iter().chain(s.motor_speeds.iter().copied())));
            out.push('\n');
        }
        out
    }

    pub fn command_log_csv(&self) -> String {
        let mut out = String::from(COMMAND_LOG_HEADER);
        out.push('\n');
        for c in &self.commands {
            out.push_str(&command_log_row(c));
            out.push('\n');
        }
        out
    }

    /// Human-readable report of the run.
    pub fn summary(&self, cfg: &ExperimentConfig) -> String {
        let mut s = String::new();
        let end = self.final_state();
        let _ = writeln!(s, "experiment summary");
        let _ = writeln!(s, "==================");
        let _ = writeln!(s, "duration           {} s ({} steps)", cfg.duration, end.step);
        let _ = writeln!(s, "command latency    {} s", cfg.latency);
        let _ = writeln!(s, "feedback latency   {} s", cfg.feedback_latency);
        let _ = writeln!(s, "integrator         {:?}", cfg.integrator);
        let _ = writeln!(s, "control rate       {} Hz", cfg.pipeline.control_rate);
        let _ = writeln!(s, "seed               {}", cfg.seed);
        let _ = writeln!(
            s,
            "reference          {} samples over [{}, {}] s",
            self.reference.len(),
            self.reference.t_start(),
            self.reference.t_end()
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "{}", self.metrics);
        let _ = writeln!(s, "quaternion norm    max deviation {:.3e}", self.max_quaternion_norm_deviation);
        let _ = writeln!(
            s,
            "final position     ({:.4}, {:.4}, {:.4}) m",
            end.quad.p.x, end.quad.p.y, end.quad.p.z
        );
        let _ = writeln!(s, "backup pipeline    {}", if self.on_backup { "active" } else { "inactive" });
        if !self.events.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(s, "events ({}):", self.events.len());
            for e in self.events.iter().take(50) {
                let _ = writeln!(s, "  {e}");
            }
            if self.events.len() > 50 {
                let _ = writeln!(s, "  ... {} more", self.events.len() - 50);
            }
        }
        s
    }

    /// Writes `state_log.csv`, `command_log.csv` and `summary.txt` into `dir`.
    pub fn write_to(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<(), HarnessError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("state_log.csv"), self.state_log_csv())?;
        fs::write(dir.join("command_log.csv"), self.command_log_csv())?;
        fs::write(dir.join("summary.txt"), self.summary(cfg))?;
        Ok(())
    }
}

/// Runs one closed-loop experiment: the simulator steps at `sim.dt`, the
/// pilot runs every control period, and commands reach the simulator
/// through the delay line. Writes logs when `output_dir` is set.
///
/// A guard trip is recorded in the metrics and the run continues on the
/// backup pipeline.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    cfg.validate()?;
    let reference = cfg.reference()?;
    let model = cfg.model;
    let dt = cfg.sim.dt;
    let t0 = reference.t_start();
    let mut initial = reference.first().state;
    initial.t = t0;
    initial.p += cfg.initial_offset;
    initial.f = initial.fd;

    let sim_cfg = SimConfig {
        dt,
        integrator: cfg.integrator,
        lowlevel: cfg.sim.lowlevel,
        latency: cfg.latency,
        disturbance: cfg.sim.disturbance,
        test_stand: false,
    };
    let mut sim = Simulator::new(model, sim_cfg, initial)?;

    let (bridge, commands_rx) = SimBridge::channel();
    let mut pilot = Pilot::new(model, &cfg.pipeline, cfg.guard.clone(), Box::new(bridge))?;
    pilot.initialize_estimator(&initial);
    pilot.set_reference(Reference::Sampled(reference.clone()), t0);

    let uses_ekf = matches!(cfg.pipeline.estimator, EstimatorConfig::Ekf(_));
    let divider = |rate: f64| ((1.0 / (rate * dt)).round() as u64).max(1);
    let mut sensors = uses_ekf.then(|| {
        (
            ImuSimulator::new(cfg.sensors.imu, model.g, cfg.seed),
            divider(cfg.sensors.imu.rate),
            PoseSensor::new(cfg.sensors.pose, cfg.seed.wrapping_add(1)),
            divider(cfg.sensors.pose.rate),
        )
    });

    let control_every = cfg.control_divider()?;
    let feedback_steps = (cfg.feedback_latency / dt).round() as usize;
    let mut history: VecDeque<QuadState> = VecDeque::with_capacity(feedback_steps + 1);
    let total_steps = (cfg.duration / dt).round() as u64;

    let mut trace = Vec::with_capacity(total_steps as usize + 1);
    trace.push(*sim.state());
    let mut commands = Vec::new();
    let mut inputs = PilotInputs::default();
    let mut guard_events = 0;

    for step in 0..total_steps {
        let now = sim.state().quad;
        history.push_back(now);
        if history.len() > feedback_steps + 1 {
            history.pop_front();
        }
        if let Some((imu, imu_every, pose, pose_every)) = &mut sensors {
            if step % *imu_every == 0 {
                inputs.imu.push(imu.sample(&now));
            }
            if step % *pose_every == 0 {
                inputs.pose.push(pose.sample(&now));
            }
        }
        if step % control_every == 0 {
            inputs.state = history.front().copied();
            let out = pilot.pilot_step(now.t, &inputs)?;
            inputs = PilotInputs::default();
            guard_events += out.guard_tripped as usize;
            for cmd in commands_rx.try_iter() {
                sim.push_command(cmd);
                commands.push(cmd);
            }
        }
        trace.push(*sim.step()?);
    }

    let states: Vec<QuadState> = trace.iter().map(|s| s.quad).collect();
    let mut metrics = compute_rmse(&states, &reference)?;
    metrics.guard_events = guard_events;
    metrics.solver = pilot.stats();

    let output = ExperimentOutput {
        metrics,
        trace,
        commands,
        events: pilot.events().to_vec(),
        reference,
        on_backup: pilot.on_backup(),
        max_quaternion_norm_deviation: sim.max_quaternion_norm_deviation(),
    };
    if let Some(dir) = &cfg.output_dir {
        output.write_to(dir, cfg)?;
    }
    Ok(output)
}

/// One row of a latency sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub latency: f64,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub const HEADER: &'static str =
        "latency,rmse,max_error,rmse_x,rmse_y,rmse_z,max_speed,max_acceleration,guard_events,mpc_warnings";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for r in &self.rows {
            let m = &r.metrics;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.latency,
                m.rmse,
                m.max_error,
                m.rmse_axis.x,
                m.rmse_axis.y,
                m.rmse_axis.z,
                m.max_speed,
                m.max_acceleration,
                m.guard_events,
                m.solver.mpc_warnings
            );
        }
        out
    }

    pub fn rmse(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.metrics.rmse).collect()
    }
}

/// Runs the experiment once per latency (in parallel, same seed) and
/// tabulates the metrics. Per-run logs are not written; when `output_dir`
/// is set the table goes to `sweep.csv` there.
pub fn latency_sweep(cfg: &ExperimentConfig, latencies: &[f64]) -> Result<SweepTable, HarnessError> {
    if latencies.len() < 2 {
        return Err(HarnessError::Usage(format!(
            "a latency sweep needs at least 2 latencies, got {}",
            latencies.len()
        )));
    }
    let rows = latencies
        .par_iter()
        .map(|&latency| {
            let run = ExperimentConfig {
                latency,
                output_dir: None,
                ..cfg.clone()
            };
            run_experiment(&run).map(|o| SweepRow {
                latency,
                metrics: o.metrics,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let table = SweepTable { rows };
    if let Some(dir) = &cfg.output_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("sweep.csv"), table.to_csv())?;
    }
    Ok(table)
}
