use std::path::PathBuf;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::estimator::EkfConfig;
use super::geometric::GeometricGains;
use super::indi::IndiConfig;
use super::mpc::MpcParams;
use super::sampler::SamplerConfig;
use super::PipelineError;

pub const MIN_CONTROL_RATE: f64 = 50.0;
pub const MAX_CONTROL_RATE: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorConfig {
    #[default]
    Feedthrough,
    Ekf(EkfConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OuterControllerConfig {
    Geometric(GeometricGains),
    Mpc(MpcParams),
}

impl Default for OuterControllerConfig {
    fn default() -> Self {
        OuterControllerConfig::Geometric(GeometricGains::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnerControllerConfig {
    #[default]
    None,
    Indi(IndiConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BridgeConfig {
    /// Deliver into the simulator's command delay line.
    #[default]
    Sim,
    /// Append commands to a CSV log.
    Log { path: PathBuf },
}

/// One complete pipeline: which modules run and with what parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Control cycles per second [Hz].
    pub control_rate: f64,
    pub estimator: EstimatorConfig,
    pub sampler: SamplerConfig,
    pub outer: OuterControllerConfig,
    pub inner: InnerControllerConfig,
    pub bridge: BridgeConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            control_rate: 100.0,
            estimator: EstimatorConfig::default(),
            sampler: SamplerConfig::default(),
            outer: OuterControllerConfig::default(),
            inner: InnerControllerConfig::default(),
            bridge: BridgeConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Geometric controller on the feedthrough estimator, the pipeline the
    /// guard falls back to unless configured otherwise.
    pub fn backup_default() -> Self {
        Self::default()
    }

    pub fn period(&self) -> f64 {
        1.0 / self.control_rate
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(MIN_CONTROL_RATE..=MAX_CONTROL_RATE).contains(&self.control_rate) {
            return Err(PipelineError::Config(format!(
                "control_rate must lie in [{MIN_CONTROL_RATE}, {MAX_CONTROL_RATE}] Hz, got {}",
                self.control_rate
            )));
        }
        if let EstimatorConfig::Ekf(e) = &self.estimator {
            e.validate()?;
        }
        if !(self.sampler.window >= 0.0 && self.sampler.window.is_finite()) {
            return Err(PipelineError::Config("sampler window must be >= 0".into()));
        }
        match &self.outer {
            OuterControllerConfig::Geometric(g) => g.validate()?,
            OuterControllerConfig::Mpc(p) => p.validate()?,
        }
        if let InnerControllerConfig::Indi(i) = &self.inner {
            i.validate(self.control_rate)?;
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Spatial bounding box watched by the guard and the pipeline it switches to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuardConfig {
    pub enabled: bool,
    pub box_min: Vector3<f64>,
    pub box_max: Vector3<f64>,
    pub backup: PipelineConfig,
}

impl Default for GuardConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            box_min: Vector3::new(-50.0, -50.0, -5.0),
            box_max: Vector3::new(50.0, 50.0, 50.0),
            backup: PipelineConfig::backup_default(),
        }
    }
}

impl GuardConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let ordered = self.box_min.iter().zip(self.box_max.iter()).all(|(lo, hi)| lo < hi);
        if !ordered {
            return Err(PipelineError::Config("guard box_min must be < box_max component-wise".into()));
        }
        self.backup.validate()
    }
}
