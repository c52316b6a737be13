//! Rotation helpers shared by the controllers, estimator and simulator.
//!
//! Quaternions are `nalgebra` unit quaternions, constructed in (w, x, y, z)
//! order and rotating body vectors into the world frame.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

/// Advances `q` by a constant body rate `w` over `dt`.
///
/// Uses the exact exponential map `q ⊗ exp(½·w·dt)` and renormalises the
/// result. A zero rate returns `q` unchanged.
pub fn quaternion_integrate(q: &UnitQuaternion<f64>, w: &Vector3<f64>, dt: f64) -> UnitQuaternion<f64> {
    let dq = UnitQuaternion::from_scaled_axis(w * dt);
    UnitQuaternion::new_normalize(q.into_inner() * dq.into_inner())
}

/// Rotation vector (axis·angle) of `q`, taking the shortest path.
pub fn rotation_vector(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let q = if q.w < 0.0 {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        *q
    };
    q.scaled_axis()
}

/// Yaw of the body x-axis projected onto the world xy-plane.
pub fn yaw_of(q: &UnitQuaternion<f64>) -> f64 {
    let x_b = q * Vector3::x();
    x_b.y.atan2(x_b.x)
}

/// Yaw recovered from an attitude built by [`attitude_from_thrust_and_yaw`].
///
/// That construction keeps body y orthogonal to the heading
/// `(cos ψ, sin ψ, 0)`, so ψ follows from body y alone. It differs from
/// [`yaw_of`] whenever the body is tilted about its x-axis.
pub fn heading_of(q: &UnitQuaternion<f64>) -> f64 {
    let y_b = q * Vector3::y();
    (-y_b.x).atan2(y_b.y)
}

/// Skew-symmetric cross-product matrix.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    v.cross_matrix()
}

/// Inverse of [`hat`]; averages the antisymmetric part.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Attitude with body z along `z_b` and the body x-axis heading `yaw`.
///
/// Returns `None` when `z_b` is (nearly) horizontal along the heading, where
/// the construction is singular.
pub fn attitude_from_thrust_and_yaw(z_b: &Vector3<f64>, yaw: f64) -> Option<UnitQuaternion<f64>> {
    let x_c = Vector3::new(yaw.cos(), yaw.sin(), 0.0);
    let y_b = z_b.cross(&x_c);
    let n = y_b.norm();
    if n < 1e-9 {
        return None;
    }
    let y_b = y_b / n;
    let x_b = y_b.cross(z_b);
    let r = Matrix3::from_columns(&[x_b, y_b, *z_b]);
    Some(UnitQuaternion::from_rotation_matrix(
        &nalgebra::Rotation3::from_matrix_unchecked(r),
    ))
}

/// Quaternion time derivative `½ q ⊗ (0, w)` in raw coordinates.
pub fn quaternion_rate(q: &Quaternion<f64>, w: &Vector3<f64>) -> Quaternion<f64> {
    q * Quaternion::from_imag(*w) * 0.5
}
