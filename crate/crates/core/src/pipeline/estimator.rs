use nalgebra::{Matrix3, SMatrix, SVector, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::math::{hat, quaternion_integrate, rotation_vector};
use crate::state::{gravity_world, QuadState};

use super::PipelineError;

/// One inertial measurement. `accel` is specific force in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    pub gyro: Vector3<f64>,
    pub accel: Vector3<f64>,
}

impl ImuSample {
    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.gyro.iter().chain(self.accel.iter()).all(|x| x.is_finite())
    }
}

/// Position and attitude fix, e.g. from motion capture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseMeasurement {
    pub t: f64,
    pub p: Vector3<f64>,
    pub q: UnitQuaternion<f64>,
    pub position_std: f64,
    /// Standard deviation of the body-frame attitude error [rad].
    pub attitude_std: f64,
}

impl PoseMeasurement {
    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.p.iter().all(|x| x.is_finite())
            && self.q.coords.iter().all(|x| x.is_finite())
            && self.position_std > 0.0
            && self.attitude_std > 0.0
    }
}

/// Passes an external state estimate (or ground truth) through.
#[derive(Debug, Clone)]
pub struct FeedthroughEstimator {
    timeout: f64,
    last: Option<QuadState>,
    rejected: usize,
}

impl FeedthroughEstimator {
    pub fn new(timeout: f64) -> Self {
        Self {
            timeout,
            last: None,
            rejected: 0,
        }
    }

    /// Accepts a new external state. Timestamp regressions and invalid
    /// states are rejected and the previous estimate is kept.
    pub fn ingest(&mut self, ext: &QuadState) -> Result<(), PipelineError> {
        if !ext.is_valid() || ext.q.coords.norm() == 0.0 {
            self.rejected += 1;
            return Err(PipelineError::InvalidArgument("external state is not finite".into()));
        }
        if let Some(prev) = &self.last {
            if ext.t < prev.t {
                self.rejected += 1;
                return Err(PipelineError::TimestampRegression {
                    previous: prev.t,
                    received: ext.t,
                });
            }
        }
        self.last = Some(*ext);
        Ok(())
    }

    /// Latest state, renormalised and re-stamped to `now`.
    pub fn estimate(&self, now: f64) -> Result<QuadState, PipelineError> {
        let last = self.last.as_ref().ok_or(PipelineError::EstimatorTimeout { age: f64::INFINITY })?;
        let age = now - last.t;
        if age > self.timeout {
            return Err(PipelineError::EstimatorTimeout { age });
        }
        let mut s = *last;
        s.renormalize();
        s.t = now;
        Ok(s)
    }

    pub fn rejected(&self) -> usize {
        self.rejected
    }
}

/// Single-shot feedthrough: returns `ext` renormalised and stamped `now`.
pub fn estimator_feedthrough(ext: &QuadState, now: f64, timeout: f64) -> Result<QuadState, PipelineError> {
    let mut est = FeedthroughEstimator::new(timeout);
    est.ingest(ext)?;
    est.estimate(now)
}

/// Noise parameters of the IMU-propagated EKF. Densities are per √Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EkfConfig {
    pub gyro_noise: f64,
    pub accel_noise: f64,
    pub gyro_bias_walk: f64,
    pub accel_bias_walk: f64,
    /// Initial standard deviations for (position, velocity, attitude,
    /// gyro bias, accel bias).
    pub initial_std: [f64; 5],
    /// Mahalanobis gate on the squared pose innovation.
    pub gate: f64,
}

/// 0.999 quantile of the χ² distribution with six degrees of freedom.
pub const CHI2_6_999: f64 = 22.457_744_484_825_323;

impl Default for EkfConfig {
    fn default() -> Self {
        Self {
            gyro_noise: 1e-3,
            accel_noise: 1e-2,
            gyro_bias_walk: 1e-5,
            accel_bias_walk: 1e-4,
            initial_std: [0.1, 0.1, 0.05, 0.01, 0.1],
            gate: CHI2_6_999,
        }
    }
}

impl EkfConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let noise = [self.gyro_noise, self.accel_noise, self.gyro_bias_walk, self.accel_bias_walk];
        if noise.iter().chain(self.initial_std.iter()).any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(PipelineError::Config("ekf noise parameters must be finite and >= 0".into()));
        }
        if !(self.gate > 0.0) {
            return Err(PipelineError::Config("ekf gate must be > 0".into()));
        }
        Ok(())
    }
}

pub type Covariance = SMatrix<f64, 15, 15>;
type ErrorState = SVector<f64, 15>;

// Error-state layout: δp, δv, δθ (body frame), δb_ω, δb_a.
const P: usize = 0;
const V: usize = 3;
const TH: usize = 6;
const BW: usize = 9;
const BA: usize = 12;

/// Nominal state and error covariance of the EKF.
#[derive(Debug, Clone, PartialEq)]
pub struct EkfState {
    pub t: f64,
    pub p: Vector3<f64>,
    pub q: UnitQuaternion<f64>,
    pub v: Vector3<f64>,
    pub bw: Vector3<f64>,
    pub ba: Vector3<f64>,
    pub cov: Covariance,
    /// Bias-corrected bodyrate and world acceleration of the last IMU sample.
    pub w: Vector3<f64>,
    pub a: Vector3<f64>,
    pub innovation: Option<Vector6<f64>>,
    pub rejected_updates: usize,
}

impl EkfState {
    pub fn new(t: f64, p: Vector3<f64>, q: UnitQuaternion<f64>, v: Vector3<f64>, cfg: &EkfConfig) -> Self {
        let mut cov = Covariance::zeros();
        for (block, std) in cfg.initial_std.iter().enumerate() {
            for i in 0..3 {
                cov[(3 * block + i, 3 * block + i)] = std * std;
            }
        }
        Self {
            t,
            p,
            q,
            v,
            bw: Vector3::zeros(),
            ba: Vector3::zeros(),
            cov,
            w: Vector3::zeros(),
            a: Vector3::zeros(),
            innovation: None,
            rejected_updates: 0,
        }
    }

    pub fn to_quad_state(&self) -> QuadState {
        QuadState {
            t: self.t,
            p: self.p,
            q: self.q,
            v: self.v,
            w: self.w,
            a: self.a,
            bw: self.bw,
            ba: self.ba,
            ..QuadState::default()
        }
    }

    pub fn asymmetry(&self) -> f64 {
        (self.cov - self.cov.transpose()).amax()
    }
}

fn symmetrize(p: &mut Covariance) {
    *p = (*p + p.transpose()) * 0.5;
}

/// Cholesky of `P + 1e-9·I` succeeds iff the smallest eigenvalue of `P` is
/// above roughly −1e-9. The eigen decomposition only runs on failure to
/// report the offending eigenvalue.
fn check_psd(p: &Covariance) -> Result<(), PipelineError> {
    let shifted = p + Covariance::identity() * 1e-9;
    if shifted.cholesky().is_some() {
        return Ok(());
    }
    let min = p.symmetric_eigenvalues().min();
    if min < -1e-9 || !min.is_finite() {
        return Err(PipelineError::NumericalFailure(format!(
            "covariance lost positive semi-definiteness (min eigenvalue {min:e})"
        )));
    }
    Ok(())
}

/// Strapdown propagation of the nominal state and first-order propagation
/// of the error covariance.
pub fn ekf_propagate(
    ekf: &EkfState,
    imu: &ImuSample,
    dt: f64,
    cfg: &EkfConfig,
    g: f64,
) -> Result<EkfState, PipelineError> {
    if !(dt > 0.0 && dt <= 0.1) {
        return Err(PipelineError::InvalidArgument(format!("ekf dt must be in (0, 0.1], got {dt}")));
    }
    if !imu.is_finite() {
        return Err(PipelineError::InvalidArgument("imu sample is not finite".into()));
    }
    let r = ekf.q.to_rotation_matrix().into_inner();
    let w = imu.gyro - ekf.bw;
    let f = imu.accel - ekf.ba;
    let a = r * f + gravity_world(g);

    let mut next = ekf.clone();
    next.t = ekf.t + dt;
    next.p = ekf.p + ekf.v * dt + a * (0.5 * dt * dt);
    next.v = ekf.v + a * dt;
    next.q = quaternion_integrate(&ekf.q, &w, dt);
    next.w = w;
    next.a = a;

    let i3 = Matrix3::identity();
    let mut fm = Covariance::identity();
    fm.fixed_view_mut::<3, 3>(P, V).copy_from(&(i3 * dt));
    fm.fixed_view_mut::<3, 3>(V, TH).copy_from(&(-r * hat(&f) * dt));
    fm.fixed_view_mut::<3, 3>(V, BA).copy_from(&(-r * dt));
    let rot_step = UnitQuaternion::from_scaled_axis(w * dt).to_rotation_matrix().into_inner();
    fm.fixed_view_mut::<3, 3>(TH, TH).copy_from(&rot_step.transpose());
    fm.fixed_view_mut::<3, 3>(TH, BW).copy_from(&(-i3 * dt));

    let mut q = Covariance::zeros();
    let densities = [
        (V, cfg.accel_noise),
        (TH, cfg.gyro_noise),
        (BW, cfg.gyro_bias_walk),
        (BA, cfg.accel_bias_walk),
    ];
    for (block, sigma) in densities {
        for i in 0..3 {
            q[(block + i, block + i)] = sigma * sigma * dt;
        }
    }
    next.cov = fm * ekf.cov * fm.transpose() + q;
    symmetrize(&mut next.cov);
    check_psd(&next.cov)?;
    Ok(next)
}

/// Outcome of a pose update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOutcome {
    Accepted,
    /// Innovation failed the Mahalanobis gate; state untouched.
    Gated,
}

/// Error-state EKF update with a pose measurement, Joseph-form covariance.
pub fn ekf_update_pose(
    ekf: &EkfState,
    meas: &PoseMeasurement,
    cfg: &EkfConfig,
) -> Result<(EkfState, UpdateOutcome), PipelineError> {
    if !meas.is_finite() {
        return Err(PipelineError::InvalidArgument("pose measurement is not finite".into()));
    }
    let mut residual = Vector6::zeros();
    residual.fixed_rows_mut::<3>(0).copy_from(&(meas.p - ekf.p));
    residual
        .fixed_rows_mut::<3>(3)
        .copy_from(&rotation_vector(&(ekf.q.inverse() * meas.q)));

    let mut h = SMatrix::<f64, 6, 15>::zeros();
    h.fixed_view_mut::<3, 3>(0, P).fill_with_identity();
    h.fixed_view_mut::<3, 3>(3, TH).fill_with_identity();
    let mut rm = SMatrix::<f64, 6, 6>::zeros();
    for i in 0..3 {
        rm[(i, i)] = meas.position_std * meas.position_std;
        rm[(3 + i, 3 + i)] = meas.attitude_std * meas.attitude_std;
    }
    let pht = ekf.cov * h.transpose();
    let s = h * pht + rm;
    let s_chol = s
        .cholesky()
        .ok_or_else(|| PipelineError::NumericalFailure("innovation covariance not positive definite".into()))?;
    let s_inv_r = s_chol.solve(&residual);
    let d2 = residual.dot(&s_inv_r);

    let mut next = ekf.clone();
    next.innovation = Some(residual);
    if !(d2 <= cfg.gate) {
        next.rejected_updates += 1;
        return Ok((next, UpdateOutcome::Gated));
    }
    let k = pht * s_chol.inverse();
    let dx: ErrorState = k * residual;
    next.p += dx.fixed_rows::<3>(P);
    next.v += dx.fixed_rows::<3>(V);
    next.q = ekf.q * UnitQuaternion::from_scaled_axis(dx.fixed_rows::<3>(TH).into_owned());
    next.bw += dx.fixed_rows::<3>(BW);
    next.ba += dx.fixed_rows::<3>(BA);

    let ikh = Covariance::identity() - k * h;
    next.cov = ikh * ekf.cov * ikh.transpose() + k * rm * k.transpose();
    symmetrize(&mut next.cov);
    check_psd(&next.cov)?;
    Ok((next, UpdateOutcome::Accepted))
}

/// Stateful wrapper that buffers IMU samples and pose fixes.
#[derive(Debug, Clone)]
pub struct EkfEstimator {
    cfg: EkfConfig,
    g: f64,
    timeout: f64,
    state: Option<EkfState>,
    last_imu: Option<ImuSample>,
    last_input_time: f64,
}

impl EkfEstimator {
    pub fn new(cfg: EkfConfig, g: f64, timeout: f64) -> Self {
        Self {
            cfg,
            g,
            timeout,
            state: None,
            last_imu: None,
            last_input_time: f64::NEG_INFINITY,
        }
    }

    /// Initialises the filter at a known state (otherwise the first pose
    /// fix initialises it at rest).
    pub fn initialize(&mut self, s: &QuadState) {
        self.state = Some(EkfState::new(s.t, s.p, s.q, s.v, &self.cfg));
        self.last_input_time = s.t;
    }

    pub fn state(&self) -> Option<&EkfState> {
        self.state.as_ref()
    }

    pub fn ingest_imu(&mut self, imu: &ImuSample) -> Result<(), PipelineError> {
        if let Some(prev) = &self.last_imu {
            if imu.t < prev.t {
                return Err(PipelineError::TimestampRegression {
                    previous: prev.t,
                    received: imu.t,
                });
            }
        }
        if let Some(ekf) = &self.state {
            // The sample is held over the interval that follows it.
            if let Some(prev) = self.last_imu {
                let dt = imu.t - ekf.t.max(prev.t);
                if dt > 0.0 {
                    let mut next = ekf_propagate(ekf, &prev, dt.min(0.1), &self.cfg, self.g)?;
                    next.t = imu.t;
                    self.state = Some(next);
                }
            } else if imu.t > ekf.t {
                let mut s = ekf.clone();
                s.t = imu.t;
                self.state = Some(s);
            }
        }
        self.last_imu = Some(*imu);
        self.last_input_time = imu.t;
        Ok(())
    }

    pub fn ingest_pose(&mut self, meas: &PoseMeasurement) -> Result<UpdateOutcome, PipelineError> {
        match &self.state {
            None => {
                self.state = Some(EkfState::new(meas.t, meas.p, meas.q, Vector3::zeros(), &self.cfg));
                self.last_input_time = meas.t;
                Ok(UpdateOutcome::Accepted)
            }
            Some(ekf) => {
                let (next, outcome) = ekf_update_pose(ekf, meas, &self.cfg)?;
                self.state = Some(next);
                if outcome == UpdateOutcome::Accepted {
                    self.last_input_time = self.last_input_time.max(meas.t);
                }
                Ok(outcome)
            }
        }
    }

    /// Current estimate, predicted forward to `now` with the last IMU
    /// sample when it lags behind.
    pub fn estimate(&self, now: f64) -> Result<QuadState, PipelineError> {
        let ekf = self.state.as_ref().ok_or(PipelineError::EstimatorTimeout { age: f64::INFINITY })?;
        let age = now - self.last_input_time;
        if age > self.timeout {
            return Err(PipelineError::EstimatorTimeout { age });
        }
        let mut s = ekf.to_quad_state();
        if let Some(imu) = &self.last_imu {
            let dt = now - ekf.t;
            if dt > 1e-12 {
                let predicted = ekf_propagate(ekf, imu, dt.min(0.1), &self.cfg, self.g)?;
                s = predicted.to_quad_state();
            }
        }
        s.t = now;
        Ok(s)
    }
}

/// The estimator slot of a pipeline.
#[derive(Debug, Clone)]
pub enum Estimator {
    Feedthrough(FeedthroughEstimator),
    Ekf(EkfEstimator),
}

impl Estimator {
    pub fn estimate(&self, now: f64) -> Result<QuadState, PipelineError> {
        match self {
            Estimator::Feedthrough(e) => e.estimate(now),
            Estimator::Ekf(e) => e.estimate(now),
        }
    }
}
