use std::fmt;
use std::sync::mpsc::{sync_channel, Receiver, SyncSender};

use nalgebra::Vector3;

use crate::model::QuadrotorModel;
use crate::references::{HoverReference, Reference};
use crate::state::{Command, QuadState, Setpoint};

use super::bridge::Bridge;
use super::config::{EstimatorConfig, GuardConfig, InnerControllerConfig, OuterControllerConfig, PipelineConfig};
use super::estimator::{EkfEstimator, Estimator, FeedthroughEstimator, ImuSample, PoseMeasurement, UpdateOutcome};
use super::geometric::GeometricController;
use super::guard::Guard;
use super::indi::IndiController;
use super::mpc::MpcController;
use super::sampler::{sample_position_based, sample_time_based, SamplerKind};
use super::PipelineError;

/// Capacity of the measurement queue.
pub const MEASUREMENT_QUEUE_CAPACITY: usize = 1024;

/// Feedthrough commands older than this hand control back to the pilot.
pub const FEEDTHROUGH_TIMEOUT: f64 = 0.1;

/// A measurement delivered through the pilot's queue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Measurement {
    State(QuadState),
    Imu(ImuSample),
    Pose(PoseMeasurement),
}

/// Everything handed to one control cycle besides the queue.
#[derive(Debug, Clone, Default)]
pub struct PilotInputs {
    /// External state estimate or ground truth.
    pub state: Option<QuadState>,
    pub imu: Vec<ImuSample>,
    pub pose: Vec<PoseMeasurement>,
    /// Command to forward while in feedthrough mode.
    pub feedthrough: Option<Command>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PilotEvent {
    GuardViolation { t: f64, p: Vector3<f64> },
    SwitchedToBackup { t: f64 },
    EstimatorTimeout { t: f64, age: f64 },
    MeasurementRejected { t: f64, reason: String },
    FeedthroughTimeout { t: f64 },
    BridgeFailure { t: f64, reason: String },
    SolverWarning { t: f64, iterations: usize },
    FlatnessSingularity { t: f64 },
}

impl fmt::Display for PilotEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PilotEvent::GuardViolation { t, p } => {
                write!(f, "t={t:.3} guard violation at ({:.3}, {:.3}, {:.3})", p.x, p.y, p.z)
            }
            PilotEvent::SwitchedToBackup { t } => write!(f, "t={t:.3} switched to backup pipeline"),
            PilotEvent::EstimatorTimeout { t, age } => write!(f, "t={t:.3} estimator timeout (age {age:.3} s)"),
            PilotEvent::MeasurementRejected { t, reason } => write!(f, "t={t:.3} measurement rejected: {reason}"),
            PilotEvent::FeedthroughTimeout { t } => write!(f, "t={t:.3} feedthrough timeout, pilot took over"),
            PilotEvent::BridgeFailure { t, reason } => write!(f, "t={t:.3} bridge failure: {reason}"),
            PilotEvent::SolverWarning { t, iterations } => {
                write!(f, "t={t:.3} mpc did not converge in {iterations} iterations")
            }
            PilotEvent::FlatnessSingularity { t } => write!(f, "t={t:.3} thrust direction undefined, attitude held"),
        }
    }
}

impl PilotEvent {
    pub fn is_guard(&self) -> bool {
        matches!(self, PilotEvent::GuardViolation { .. })
    }
}

/// Counters over the pilot's lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolverStats {
    pub cycles: usize,
    pub mpc_solves: usize,
    pub mpc_iterations: usize,
    pub mpc_warnings: usize,
    pub indi_fallbacks: usize,
    pub indi_clamps: usize,
    pub singularities: usize,
    pub rejected_measurements: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotOutput {
    pub command: Command,
    /// The estimator timed out and a safety hover was sent.
    pub degraded: bool,
    /// The guard tripped during this cycle.
    pub guard_tripped: bool,
    /// The primary bridge failed and the safety hover went out through the
    /// backup bridge.
    pub bridge_failed: bool,
}

enum Outer {
    Geometric(GeometricController),
    Mpc(MpcController),
}

struct ActivePipeline {
    cfg: PipelineConfig,
    estimator: Estimator,
    outer: Outer,
    inner: Option<IndiController>,
}

impl ActivePipeline {
    fn build(cfg: &PipelineConfig, model: &QuadrotorModel) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let timeout = 2.0 * cfg.period();
        let estimator = match &cfg.estimator {
            EstimatorConfig::Feedthrough => Estimator::Feedthrough(FeedthroughEstimator::new(timeout)),
            EstimatorConfig::Ekf(e) => Estimator::Ekf(EkfEstimator::new(*e, model.g, timeout)),
        };
        let outer = match &cfg.outer {
            OuterControllerConfig::Geometric(g) => Outer::Geometric(GeometricController::new(*g)),
            OuterControllerConfig::Mpc(p) => Outer::Mpc(MpcController::new(*p)?),
        };
        let inner = match &cfg.inner {
            InnerControllerConfig::None => None,
            InnerControllerConfig::Indi(i) => Some(IndiController::new(*i, cfg.control_rate)?),
        };
        Ok(Self {
            cfg: cfg.clone(),
            estimator,
            outer,
            inner,
        })
    }
}

/// Runs the control cycle and owns all pipeline state.
pub struct Pilot {
    model: QuadrotorModel,
    active: ActivePipeline,
    guard: Guard,
    on_backup: bool,
    reference: Option<Reference>,
    reference_t0: f64,
    progress: f64,
    bridge: Box<dyn Bridge>,
    backup_bridge: Option<Box<dyn Bridge>>,
    queue_tx: SyncSender<Measurement>,
    queue_rx: Receiver<Measurement>,
    feedthrough: Option<(f64, Option<Command>)>,
    last_external: Option<QuadState>,
    last_estimate: Option<QuadState>,
    last_setpoint: Option<Setpoint>,
    last_prediction: Vec<QuadState>,
    events: Vec<PilotEvent>,
    stats: SolverStats,
}

impl Pilot {
    pub fn new(
        model: QuadrotorModel,
        cfg: &PipelineConfig,
        guard: GuardConfig,
        bridge: Box<dyn Bridge>,
    ) -> Result<Self, PipelineError> {
        model.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        guard.validate()?;
        let (queue_tx, queue_rx) = sync_channel(MEASUREMENT_QUEUE_CAPACITY);
        Ok(Self {
            active: ActivePipeline::build(cfg, &model)?,
            model,
            guard: Guard::new(guard),
            on_backup: false,
            reference: None,
            reference_t0: 0.0,
            progress: 0.0,
            bridge,
            backup_bridge: None,
            queue_tx,
            queue_rx,
            feedthrough: None,
            last_external: None,
            last_estimate: None,
            last_setpoint: None,
            last_prediction: Vec::new(),
            events: Vec::new(),
            stats: SolverStats::default(),
        })
    }

    pub fn with_backup_bridge(mut self, bridge: Box<dyn Bridge>) -> Self {
        self.backup_bridge = Some(bridge);
        self
    }

    /// Seeds the EKF (if any) with a known initial state.
    pub fn initialize_estimator(&mut self, s: &QuadState) {
        if let Estimator::Ekf(e) = &mut self.active.estimator {
            e.initialize(s);
        }
    }

    /// Activates `reference` at pilot time `now`. Sampled trajectories are
    /// replayed from their start; velocity references are anchored at the
    /// latest estimate.
    pub fn set_reference(&mut self, reference: Reference, now: f64) {
        let reference = match (reference, &self.last_estimate) {
            (Reference::Velocity(mut v), Some(est)) => {
                v.p0 = est.p;
                v.yaw0 = est.yaw();
                Reference::Velocity(v)
            }
            (r, _) => r,
        };
        self.reference = Some(reference);
        self.reference_t0 = now;
        self.progress = 0.0;
    }

    pub fn reference(&self) -> Option<&Reference> {
        self.reference.as_ref()
    }

    /// Pilot time at which the active reference started.
    pub fn reference_start(&self) -> f64 {
        self.reference_t0
    }

    /// Forward externally supplied commands from now on.
    pub fn enable_feedthrough(&mut self, now: f64) {
        self.feedthrough = Some((now, None));
    }

    pub fn feedthrough_active(&self) -> bool {
        self.feedthrough.is_some()
    }

    /// Producer end of the bounded measurement queue.
    pub fn measurement_sender(&self) -> SyncSender<Measurement> {
        self.queue_tx.clone()
    }

    pub fn model(&self) -> &QuadrotorModel {
        &self.model
    }

    pub fn active_config(&self) -> &PipelineConfig {
        &self.active.cfg
    }

    pub fn on_backup(&self) -> bool {
        self.on_backup
    }

    pub fn guard(&self) -> &Guard {
        &self.guard
    }

    pub fn events(&self) -> &[PilotEvent] {
        &self.events
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    pub fn last_setpoint(&self) -> Option<&Setpoint> {
        self.last_setpoint.as_ref()
    }

    /// MPC prediction of the last cycle (empty for other controllers).
    pub fn last_prediction(&self) -> &[QuadState] {
        &self.last_prediction
    }

    fn ingest(&mut self, m: Measurement, now: f64) {
        let result = match (&mut self.active.estimator, m) {
            (est, Measurement::State(s)) => {
                if s.is_valid() {
                    self.last_external = Some(s);
                }
                match est {
                    Estimator::Feedthrough(f) => f.ingest(&s),
                    Estimator::Ekf(_) => Ok(()),
                }
            }
            (Estimator::Ekf(e), Measurement::Imu(imu)) => e.ingest_imu(&imu),
            (Estimator::Ekf(e), Measurement::Pose(pose)) => match e.ingest_pose(&pose) {
                Ok(UpdateOutcome::Gated) => Err(PipelineError::InvalidArgument("pose innovation gated".into())),
                other => other.map(|_| ()),
            },
            (Estimator::Feedthrough(_), _) => Ok(()),
        };
        if let Err(e) = result {
            self.stats.rejected_measurements += 1;
            self.events.push(PilotEvent::MeasurementRejected {
                t: now,
                reason: e.to_string(),
            });
        }
    }

    fn safety_hover(&self, now: f64) -> Command {
        Command::collective_bodyrate(now, self.model.mass * self.model.g, Vector3::zeros())
    }

    fn switch_to_backup(&mut self, now: f64, est: &QuadState) -> Result<(), PipelineError> {
        let backup = self.guard.config().backup.clone();
        self.active = ActivePipeline::build(&backup, &self.model)?;
        if let Some(ext) = self.last_external {
            self.ingest(Measurement::State(ext), now);
        }
        let anchor = if est.p.iter().all(|x| x.is_finite()) {
            (est.p, est.yaw())
        } else {
            self.last_estimate.map(|s| (s.p, s.yaw())).unwrap_or_default()
        };
        let yaw = if anchor.1.is_finite() { anchor.1 } else { 0.0 };
        self.set_reference(Reference::Hover(HoverReference { p_ref: anchor.0, yaw_ref: yaw }), now);
        self.feedthrough = None;
        self.on_backup = true;
        self.events.push(PilotEvent::SwitchedToBackup { t: now });
        Ok(())
    }

    fn send(&mut self, cmd: Command, now: f64, out: &mut PilotOutput) -> Result<(), PipelineError> {
        match self.bridge.send(&cmd, now) {
            Ok(_) => {
                out.command = Command { t: now, ..cmd };
                Ok(())
            }
            Err(e) => {
                self.events.push(PilotEvent::BridgeFailure {
                    t: now,
                    reason: e.to_string(),
                });
                let hover = self.safety_hover(now);
                match &mut self.backup_bridge {
                    Some(b) => {
                        b.send(&hover, now)?;
                        out.command = hover;
                        out.bridge_failed = true;
                        Ok(())
                    }
                    None => Err(e.into()),
                }
            }
        }
    }

    fn sample(&mut self, now: f64, est: &QuadState, n: usize, dt: f64) -> Result<Vec<Setpoint>, PipelineError> {
        let reference = self
            .reference
            .get_or_insert_with(|| Reference::Hover(HoverReference { p_ref: est.p, yaw_ref: est.yaw() }));
        Ok(match reference {
            Reference::Sampled(traj) => match self.active.cfg.sampler.kind {
                SamplerKind::Time => sample_time_based(traj, traj.t_start() + (now - self.reference_t0), n, dt),
                SamplerKind::Position => {
                    let (sps, progress) =
                        sample_position_based(traj, &est.p, self.progress, n, dt, self.active.cfg.sampler.window);
                    self.progress = progress;
                    sps
                }
            },
            r => (0..n)
                .map(|k| r.setpoint_at(now + k as f64 * dt, &self.model))
                .collect::<Result<_, _>>()?,
        })
    }

    /// Runs one control cycle at pilot time `now` and returns the command
    /// handed to the bridge.
    pub fn pilot_step(&mut self, now: f64, inputs: &PilotInputs) -> Result<PilotOutput, PipelineError> {
        self.stats.cycles += 1;
        let queued: Vec<_> = self.queue_rx.try_iter().collect();
        for m in queued {
            self.ingest(m, now);
        }
        for imu in &inputs.imu {
            self.ingest(Measurement::Imu(*imu), now);
        }
        for pose in &inputs.pose {
            self.ingest(Measurement::Pose(*pose), now);
        }
        if let Some(s) = inputs.state {
            self.ingest(Measurement::State(s), now);
        }

        let mut out = PilotOutput {
            command: self.safety_hover(now),
            degraded: false,
            guard_tripped: false,
            bridge_failed: false,
        };

        let mut est = match self.active.estimator.estimate(now) {
            Ok(s) => s,
            Err(PipelineError::EstimatorTimeout { age }) => {
                self.events.push(PilotEvent::EstimatorTimeout { t: now, age });
                out.degraded = true;
                self.send(self.safety_hover(now), now, &mut out)?;
                return Ok(out);
            }
            Err(e) => return Err(e),
        };

        let verdict = self.guard.check(&est);
        if verdict.new_violation {
            self.events.push(PilotEvent::GuardViolation { t: now, p: est.p });
            out.guard_tripped = true;
            self.switch_to_backup(now, &est)?;
            match self.active.estimator.estimate(now) {
                Ok(s) => est = s,
                Err(_) => {
                    out.degraded = true;
                    self.send(self.safety_hover(now), now, &mut out)?;
                    return Ok(out);
                }
            }
        }
        if est.p.iter().all(|x| x.is_finite()) {
            self.last_estimate = Some(est);
        }

        if let Some((since, latest)) = &mut self.feedthrough {
            if let Some(cmd) = inputs.feedthrough {
                *latest = Some(cmd);
                *since = now;
            }
            if now - *since > FEEDTHROUGH_TIMEOUT {
                self.feedthrough = None;
                self.events.push(PilotEvent::FeedthroughTimeout { t: now });
                self.set_reference(Reference::Hover(HoverReference { p_ref: est.p, yaw_ref: est.yaw() }), now);
            } else {
                let cmd = latest.unwrap_or_else(|| self.safety_hover(now));
                self.send(cmd, now, &mut out)?;
                return Ok(out);
            }
        }

        let (n, dt) = match &self.active.outer {
            Outer::Geometric(_) => (1, self.active.cfg.period()),
            Outer::Mpc(c) => (c.params().horizon, c.params().dt),
        };
        let setpoints = self.sample(now, &est, n, dt)?;
        self.last_setpoint = Some(setpoints[0]);
        let mut cmd = match &mut self.active.outer {
            Outer::Geometric(c) => {
                let o = c.control(&est, &setpoints[0], &self.model);
                if o.singular {
                    self.stats.singularities += 1;
                    self.events.push(PilotEvent::FlatnessSingularity { t: now });
                }
                o.command
            }
            Outer::Mpc(c) => {
                let sol = c.solve(&est, &setpoints, &self.model)?;
                self.stats.mpc_solves += 1;
                self.stats.mpc_iterations += sol.iterations;
                if sol.warning() {
                    self.stats.mpc_warnings += 1;
                    self.events.push(PilotEvent::SolverWarning {
                        t: now,
                        iterations: sol.iterations,
                    });
                }
                self.last_prediction = sol.predicted;
                sol.command
            }
        };
        if let Some(indi) = &mut self.active.inner {
            let o = indi.control(&cmd, &est, &self.model);
            self.stats.indi_fallbacks += o.fallback as usize;
            self.stats.indi_clamps += o.clamped as usize;
            cmd = o.command;
        }
        self.send(cmd, now, &mut out)?;
        Ok(out)
    }
}
