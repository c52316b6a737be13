use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::model::QuadrotorModel;
use crate::pipeline::{GuardConfig, PipelineConfig};
use crate::references::{hover_setpoint, trajectory_load_file, LoopTrajectory, SampledTrajectory};
use crate::simulator::{Disturbance, ImuConfig, IntegratorKind, LowLevelConfig, PoseSensorConfig};

/// Where the reference trajectory comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySource {
    /// Hold a fixed position for the whole run.
    Hover {
        position: Vector3<f64>,
        #[serde(default)]
        yaw: f64,
    },
    /// Circle or lemniscate generated at load time.
    Loop(LoopTrajectory),
    /// Trajectory CSV file. Relative paths resolve against the config file.
    File { path: PathBuf },
}

impl Default for TrajectorySource {
    fn default() -> Self {
        TrajectorySource::Hover {
            position: Vector3::new(0.0, 0.0, 1.0),
            yaw: 0.0,
        }
    }
}

/// Simulator settings that are not experiment-level knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub dt: f64,
    pub lowlevel: LowLevelConfig,
    pub disturbance: Disturbance,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            lowlevel: LowLevelConfig::default(),
            disturbance: Disturbance::default(),
        }
    }
}

/// Simulated sensors, used when the pipeline runs the EKF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSettings {
    pub imu: ImuConfig,
    pub pose: PoseSensorConfig,
}

/// Everything one closed-loop run needs. Same config and seed give the same
/// logs byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: QuadrotorModel,
    pub pipeline: PipelineConfig,
    pub guard: GuardConfig,
    pub trajectory: TrajectorySource,
    /// Simulated time [s].
    pub duration: f64,
    /// Command transport latency [s].
    pub latency: f64,
    /// Age of the state handed to the pilot [s].
    pub feedback_latency: f64,
    pub integrator: IntegratorKind,
    pub seed: u64,
    /// Added to the initial position, which otherwise is the reference
    /// start.
    pub initial_offset: Vector3<f64>,
    /// Logs and summary go here when set.
    pub output_dir: Option<PathBuf>,
    pub sim: SimSettings,
    pub sensors: SensorSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: QuadrotorModel::default(),
            pipeline: PipelineConfig::default(),
            guard: GuardConfig::default(),
            trajectory: TrajectorySource::default(),
            duration: 10.0,
            latency: 0.0,
            feedback_latency: 0.0,
            integrator: IntegratorKind::Rk4,
            seed: 0,
            initial_offset: Vector3::zeros(),
            output_dir: None,
            sim: SimSettings::default(),
            sensors: SensorSettings::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses a TOML config. `origin` names the source in error messages.
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config {
            path: origin.to_path_buf(),
            message: e.to_string().trim_end().to_string(),
        })?;
        cfg.validate().map_err(|e| match e {
            HarnessError::Config { message, .. } => HarnessError::Config {
                path: origin.to_path_buf(),
                message,
            },
            other => other,
        })?;
        Ok(cfg)
    }

    /// Reads a config file; relative trajectory and output paths are taken
    /// relative to the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut cfg = Self::from_toml_str(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let TrajectorySource::File { path: p } = &mut cfg.trajectory {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(out) = &mut cfg.output_dir {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("experiment config always serialises")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |message: String| HarnessError::Config {
            path: PathBuf::new(),
            message,
        };
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(bad(format!("duration must be > 0, got {}", self.duration)));
        }
        if !(self.latency >= 0.0 && self.latency.is_finite()) {
            return Err(bad(format!("latency must be >= 0, got {}", self.latency)));
        }
        if !(self.feedback_latency >= 0.0 && self.feedback_latency.is_finite()) {
            return Err(bad(format!("feedback_latency must be >= 0, got {}", self.feedback_latency)));
        }
        if !self.initial_offset.iter().all(|x| x.is_finite()) {
            return Err(bad("initial_offset must be finite".into()));
        }
        if !(self.sim.dt > 0.0 && self.sim.dt <= 0.01) {
            return Err(bad(format!("sim.dt must lie in (0, 0.01], got {}", self.sim.dt)));
        }
        self.model.validate().map_err(|e| bad(e.to_string()))?;
        self.pipeline.validate().map_err(|e| bad(e.to_string()))?;
        self.guard.validate().map_err(|e| bad(e.to_string()))?;
        self.control_divider()?;
        for (name, rate) in [("imu", self.sensors.imu.rate), ("pose", self.sensors.pose.rate)] {
            if !(rate > 0.0 && rate <= 1.0 / self.sim.dt) {
                return Err(bad(format!("sensors.{name}.rate must lie in (0, {}] Hz", 1.0 / self.sim.dt)));
            }
        }
        if let TrajectorySource::Loop(l) = &self.trajectory {
            l.validate().map_err(|e| bad(e.to_string()))?;
        }
        Ok(())
    }

    /// Simulator steps per control cycle. The control period must be a
    /// whole number of simulator steps.
    pub fn control_divider(&self) -> Result<u64, HarnessError> {
        let ratio = 1.0 / (self.pipeline.control_rate * self.sim.dt);
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-6 * n {
            return Err(HarnessError::Config {
                path: PathBuf::new(),
                message: format!(
                    "control period {} s is not a whole number of simulator steps ({} s)",
                    1.0 / self.pipeline.control_rate,
                    self.sim.dt
                ),
            });
        }
        Ok(n as u64)
    }

    /// Builds the reference trajectory. Hover references become a two-point
    /// trajectory spanning the run.
    pub fn reference(&self) -> Result<SampledTrajectory, HarnessError> {
        Ok(match &self.trajectory {
            TrajectorySource::Hover { position, yaw } => SampledTrajectory::new(vec![
                hover_setpoint(0.0, *position, *yaw, &self.model),
                hover_setpoint(self.duration, *position, *yaw, &self.model),
            ])?,
            TrajectorySource::Loop(l) => l.generate(&self.model)?,
            TrajectorySource::File { path } => trajectory_load_file(path).map_err(|e| HarnessError::Trajectory {
                path: path.clone(),
                source: e,
            })?,
        })
    }
}
