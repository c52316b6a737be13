use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{flatness_setpoint, FlatOutput, ReferenceError};
use crate::model::QuadrotorModel;
use crate::state::Setpoint;

const MAX_POSITION_COEFFS: usize = 12;
const MAX_YAW_COEFFS: usize = 6;
const REST_TOL: f64 = 1e-9;

/// Position and yaw as polynomials of time since `t_start`.
///
/// Coefficients are in ascending powers: `c[0] + c[1]·τ + c[2]·τ² + …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialReference {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub yaw: Vec<f64>,
    pub t_start: f64,
    pub duration: f64,
}

impl PolynomialReference {
    pub fn new(
        xyz: [Vec<f64>; 3],
        yaw: Vec<f64>,
        t_start: f64,
        duration: f64,
    ) -> Result<Self, ReferenceError> {
        let [x, y, z] = xyz;
        let r = Self {
            x,
            y,
            z,
            yaw,
            t_start,
            duration,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), ReferenceError> {
        let bad = |m: &str| Err(ReferenceError::InvalidArgument(m.to_string()));
        if !(self.duration > 0.0) || !self.t_start.is_finite() || !self.duration.is_finite() {
            return bad("polynomial duration must be finite and > 0");
        }
        for c in [&self.x, &self.y, &self.z] {
            if c.is_empty() || c.len() > MAX_POSITION_COEFFS {
                return bad("position polynomials need 1..=12 coefficients (degree <= 11)");
            }
        }
        if self.yaw.is_empty() || self.yaw.len() > MAX_YAW_COEFFS {
            return bad("yaw polynomial needs 1..=6 coefficients (degree <= 5)");
        }
        if [&self.x, &self.y, &self.z, &self.yaw].iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return bad("polynomial coefficients must be finite");
        }
        Ok(())
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.duration
    }

    fn flat_at_offset(&self, tau: f64) -> FlatOutput {
        let [x, y, z] = [&self.x, &self.y, &self.z].map(|c| derivatives(c, tau));
        let col = |k: usize| Vector3::new(x[k], y[k], z[k]);
        let yaw = derivatives(&self.yaw, tau);
        FlatOutput {
            t: self.t_start + tau,
            p: col(0),
            v: col(1),
            a: col(2),
            j: col(3),
            s: col(4),
            yaw: yaw[0],
            yaw_rate: yaw[1],
            yaw_acc: yaw[2],
        }
    }

    /// Flat output at absolute time `t`, clamped to the reference interval.
    pub fn flat_output(&self, t: f64) -> FlatOutput {
        let tau = t - self.t_start;
        if (0.0..=self.duration).contains(&tau) {
            return self.flat_at_offset(tau);
        }
        let mut flat = self.flat_at_offset(tau.clamp(0.0, self.duration));
        let at_rest = flat.v.amax() <= REST_TOL && flat.a.amax() <= REST_TOL && flat.yaw_rate.abs() <= REST_TOL;
        if at_rest {
            flat.v = Vector3::zeros();
            flat.a = Vector3::zeros();
            flat.j = Vector3::zeros();
            flat.s = Vector3::zeros();
            flat.yaw_rate = 0.0;
            flat.yaw_acc = 0.0;
        }
        flat.t = t;
        flat
    }
}

/// Value and first four derivatives of a polynomial, by Horner's scheme on
/// each derivative's coefficients.
pub(crate) fn derivatives(coeffs: &[f64], tau: f64) -> [f64; 5] {
    let mut out = [0.0; 5];
    let mut c: Vec<f64> = coeffs.to_vec();
    for slot in out.iter_mut() {
        *slot = c.iter().rev().fold(0.0, |acc, &k| acc * tau + k);
        if c.len() <= 1 {
            break;
        }
        c = c.iter().enumerate().skip(1).map(|(i, &k)| i as f64 * k).collect();
    }
    out
}

/// Setpoint of a polynomial reference at absolute time `t`.
///
/// Times outside the reference interval clamp to the nearest end. At a
/// clamped end the higher derivatives are zeroed only if the polynomial
/// already rests there.
pub fn sample_polynomial(r: &PolynomialReference, t: f64, model: &QuadrotorModel) -> Result<Setpoint, ReferenceError> {
    flatness_setpoint(&r.flat_output(t), model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn constant_polynomial_is_hover() {
        let m = QuadrotorModel::default();
        let r = PolynomialReference::new([vec![1.0], vec![2.0], vec![3.0]], vec![0.0], 0.0, 5.0).unwrap();
        for t in [-1.0, 0.0, 2.0, 5.0, 9.0] {
            let sp = sample_polynomial(&r, t, &m).unwrap();
            assert_eq!(sp.state.p, Vector3::new(1.0, 2.0, 3.0));
            assert_eq!(sp.state.v, Vector3::zeros());
            assert!(sp.state.q.angle() < 1e-15);
            assert_abs_diff_eq!(sp.input.single_rotor_thrusts().unwrap().sum(), m.mass * m.g, epsilon = 1e-12);
        }
    }

    #[test]
    fn linear_motion() {
        let m = QuadrotorModel::default();
        let r = PolynomialReference::new([vec![0.0, 1.0], vec![0.0], vec![0.0]], vec![0.0], 0.0, 5.0).unwrap();
        let sp = sample_polynomial(&r, 2.0, &m).unwrap();
        assert_eq!(sp.state.p, Vector3::new(2.0, 0.0, 0.0));
        assert_eq!(sp.state.v, Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(sp.state.a, Vector3::zeros());
        // past the end: still moving, so evaluated at the boundary
        let sp = sample_polynomial(&r, 7.0, &m).unwrap();
        assert_eq!(sp.state.p, Vector3::new(5.0, 0.0, 0.0));
        assert_eq!(sp.state.v, Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(sp.state.t, 7.0);
    }

    #[test]
    fn degree_nine_derivatives_match_numeric_differentiation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let c: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let tau = 0.37;
        let d = derivatives(&c, tau);
        // Oracle: direct power-sum evaluation, differentiated with a
        // five-point stencil on the previous derivative.
        let eval = |x: f64| c.iter().enumerate().map(|(i, k)| k * x.powi(i as i32)).sum::<f64>();
        assert_abs_diff_eq!(d[0], eval(tau), epsilon = 1e-14);
        let h = 1e-3;
        let stencil = |f: &dyn Fn(f64) -> f64, x: f64| {
            (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
        };
        for k in 1..5 {
            let prev = |x: f64| derivatives(&c, x)[k - 1];
            let numeric = stencil(&prev, tau);
            assert!(
                (numeric - d[k]).abs() <= 1e-6 * d[k].abs().max(1.0),
                "k={k}: {numeric} vs {}",
                d[k]
            );
        }
    }

    #[test]
    fn rest_end_zeroes_derivatives() {
        let m = QuadrotorModel::default();
        // x(τ) = 3τ² - 2τ³ on [0, 1] ends at rest in velocity but not acceleration
        let r = PolynomialReference::new([vec![0.0, 0.0, 3.0, -2.0], vec![0.0], vec![0.0]], vec![0.0], 0.0, 1.0).unwrap();
        let sp = sample_polynomial(&r, 2.0, &m).unwrap();
        assert_abs_diff_eq!(sp.state.a.x, -6.0, epsilon = 1e-12);
        // septic smoothstep rests with zero velocity and acceleration
        let r = PolynomialReference::new(
            [vec![0.0, 0.0, 0.0, 0.0, 35.0, -84.0, 70.0, -20.0], vec![0.0], vec![0.0]],
            vec![0.0],
            0.0,
            1.0,
        )
        .unwrap();
        let sp = sample_polynomial(&r, 2.0, &m).unwrap();
        assert_abs_diff_eq!(sp.state.p.x, 1.0, epsilon = 1e-12);
        assert_eq!(sp.state.a, Vector3::zeros());
        assert_eq!(sp.state.j, Vector3::zeros());
    }

    #[test]
    fn invalid_polynomials_rejected() {
        assert!(PolynomialReference::new([vec![], vec![0.0], vec![0.0]], vec![0.0], 0.0, 1.0).is_err());
        assert!(PolynomialReference::new([vec![0.0; 13], vec![0.0], vec![0.0]], vec![0.0], 0.0, 1.0).is_err());
        assert!(PolynomialReference::new([vec![0.0], vec![0.0], vec![0.0]], vec![0.0; 7], 0.0, 1.0).is_err());
        assert!(PolynomialReference::new([vec![0.0], vec![0.0], vec![0.0]], vec![0.0], 0.0, 0.0).is_err());
    }
}
