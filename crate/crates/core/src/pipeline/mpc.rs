//! Nonlinear MPC on rotor thrusts.
//!
//! The horizon has `N` nodes spaced `dt` apart; node `k` tracks setpoint
//! `k` and the `N − 1` inputs between nodes are per-rotor thrusts held
//! constant over each interval. Dynamics are the nominal rigid body driven
//! by rotor thrusts (no motor lag, no drag), discretised with RK4.
//!
//! Each iteration linearises the dynamics along the current rollout with
//! finite differences in the 12-dimensional tangent space (position,
//! attitude rotation vector, velocity, bodyrate), solves the quadratic
//! subproblem with a Riccati recursion whose per-stage input step is a
//! small box-constrained QP, and rolls the nonlinear model forward with a
//! backtracking line search. Rolling out from the measured state keeps the
//! shooting nodes continuous, and every input is clamped to the rotor
//! limits, so any iterate is a feasible answer.

use nalgebra::{Matrix4, SMatrix, SVector, UnitQuaternion, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::math::rotation_vector;
use crate::model::{Allocation, QuadrotorModel};
use crate::state::{gravity_world, Actuation, Command, QuadState, Setpoint};

use super::PipelineError;

const NX: usize = 12;
type Tangent = SVector<f64, NX>;
type MatX = SMatrix<f64, NX, NX>;
type MatB = SMatrix<f64, NX, 4>;
type MatK = SMatrix<f64, 4, NX>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcParams {
    /// Number of horizon nodes `N`, including the current state.
    pub horizon: usize,
    /// Node spacing [s].
    pub dt: f64,
    pub q_position: f64,
    pub q_attitude: f64,
    pub q_velocity: f64,
    pub q_bodyrate: f64,
    /// Weight on the deviation of each rotor thrust from the reference
    /// input [1/N²].
    pub r_thrust: f64,
    pub max_iterations: usize,
    /// Relative cost decrease below which the solver stops.
    pub tolerance: f64,
    /// Command modality sent downstream.
    pub output: MpcOutput,
}

/// What the MPC hands to the bridge. The optimisation always runs on rotor
/// thrusts so actuator limits are respected either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MpcOutput {
    /// The first optimised rotor thrusts.
    #[default]
    Thrusts,
    /// Sum of the first optimised thrusts and the bodyrate predicted at the
    /// first node, for a downstream bodyrate controller.
    CollectiveBodyrate,
}

impl Default for MpcParams {
    fn default() -> Self {
        Self {
            horizon: 20,
            dt: 0.05,
            q_position: 100.0,
            q_attitude: 5.0,
            q_velocity: 20.0,
            q_bodyrate: 5.0,
            r_thrust: 5.0,
            max_iterations: 10,
            tolerance: 1e-4,
            output: MpcOutput::Thrusts,
        }
    }
}

impl MpcParams {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(format!("mpc: {m}")));
        if self.horizon < 5 {
            return bad("horizon must be >= 5");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be > 0");
        }
        let state_w = [self.q_position, self.q_attitude, self.q_velocity, self.q_bodyrate];
        if state_w.iter().chain([&self.r_thrust]).any(|w| !(*w >= 0.0 && w.is_finite())) {
            return bad("weights must be finite and >= 0");
        }
        if !state_w.iter().any(|w| *w > 0.0) {
            return bad("at least one state weight must be > 0");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be >= 1");
        }
        if !(self.tolerance >= 0.0) {
            return bad("tolerance must be >= 0");
        }
        Ok(())
    }

    fn state_weights(&self) -> Tangent {
        let mut w = Tangent::zeros();
        for i in 0..3 {
            w[i] = self.q_position;
            w[3 + i] = self.q_attitude;
            w[6 + i] = self.q_velocity;
            w[9 + i] = self.q_bodyrate;
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSolution {
    /// First input of the optimised sequence, stamped with the state time.
    pub command: Command,
    /// Predicted states at the `N` horizon nodes.
    pub predicted: Vec<QuadState>,
    /// The `N − 1` optimised inputs.
    pub inputs: Vec<Vector4<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub cost: f64,
}

impl MpcSolution {
    /// Set when the iteration limit was hit before convergence.
    pub fn warning(&self) -> bool {
        !self.converged
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    p: Vector3<f64>,
    q: UnitQuaternion<f64>,
    v: Vector3<f64>,
    w: Vector3<f64>,
}

impl Node {
    fn from_state(s: &QuadState) -> Self {
        Self {
            p: s.p,
            q: s.q,
            v: s.v,
            w: s.w,
        }
    }

    fn retract(&self, d: &Tangent) -> Self {
        Self {
            p: self.p + d.fixed_rows::<3>(0),
            q: self.q * UnitQuaternion::from_scaled_axis(d.fixed_rows::<3>(3).into_owned()),
            v: self.v + d.fixed_rows::<3>(6),
            w: self.w + d.fixed_rows::<3>(9),
        }
    }

    /// `self ⊖ other`, the tangent vector taking `other` to `self`.
    fn minus(&self, other: &Self) -> Tangent {
        let mut d = Tangent::zeros();
        d.fixed_rows_mut::<3>(0).copy_from(&(self.p - other.p));
        d.fixed_rows_mut::<3>(3).copy_from(&rotation_vector(&(other.q.inverse() * self.q)));
        d.fixed_rows_mut::<3>(6).copy_from(&(self.v - other.v));
        d.fixed_rows_mut::<3>(9).copy_from(&(self.w - other.w));
        d
    }
}

/// Nominal thrust-driven rigid-body model.
struct Dynamics {
    alloc: Allocation,
    mass: f64,
    inertia: Vector3<f64>,
    gravity: Vector3<f64>,
    lo: Vector4<f64>,
    hi: Vector4<f64>,
}

impl Dynamics {
    fn new(model: &QuadrotorModel) -> Self {
        Self {
            alloc: model.allocation(),
            mass: model.mass,
            inertia: model.inertia,
            gravity: gravity_world(model.g),
            lo: Vector4::repeat(model.f_min),
            hi: Vector4::repeat(model.f_max),
        }
    }

    fn clamp(&self, u: &Vector4<f64>) -> Vector4<f64> {
        u.zip_zip_map(&self.lo, &self.hi, |x, l, h| x.clamp(l, h))
    }

    fn step(&self, x: &Node, u: &Vector4<f64>, dt: f64) -> Node {
        let (thrust, torque) = self.alloc.wrench(u);
        let f_body = Vector3::new(0.0, 0.0, thrust / self.mass);
        let deriv = |q: &nalgebra::Quaternion<f64>, v: &Vector3<f64>, w: &Vector3<f64>| {
            let qn = UnitQuaternion::new_normalize(*q);
            let acc = qn * f_body + self.gravity;
            let jw = self.inertia.component_mul(w);
            let w_dot = (torque - w.cross(&jw)).component_div(&self.inertia);
            let q_dot = q * nalgebra::Quaternion::from_imag(*w) * 0.5;
            (*v, q_dot, acc, w_dot)
        };
        let q0 = x.q.into_inner();
        let k1 = deriv(&q0, &x.v, &x.w);
        let h = 0.5 * dt;
        let k2 = deriv(&(q0 + k1.1 * h), &(x.v + k1.2 * h), &(x.w + k1.3 * h));
        let k3 = deriv(&(q0 + k2.1 * h), &(x.v + k2.2 * h), &(x.w + k2.3 * h));
        let k4 = deriv(&(q0 + k3.1 * dt), &(x.v + k3.2 * dt), &(x.w + k3.3 * dt));
        let s = dt / 6.0;
        Node {
            p: x.p + (k1.0 + k2.0 * 2.0 + k3.0 * 2.0 + k4.0) * s,
            q: UnitQuaternion::new_normalize(q0 + (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) * s),
            v: x.v + (k1.2 + k2.2 * 2.0 + k3.2 * 2.0 + k4.2) * s,
            w: x.w + (k1.3 + k2.3 * 2.0 + k3.3 * 2.0 + k4.3) * s,
        }
    }
}

/// Minimises `½ xᵀHx + gᵀx` over `lo ≤ x ≤ hi` by projected Newton.
/// Returns the minimiser and which components ended on a bound.
fn box_qp(h: &Matrix4<f64>, g: &Vector4<f64>, lo: &Vector4<f64>, hi: &Vector4<f64>) -> Option<(Vector4<f64>, [bool; 4])> {
    let project = |x: &Vector4<f64>| x.zip_zip_map(lo, hi, |v, l, u| v.clamp(l, u));
    let objective = |x: &Vector4<f64>| g.dot(x) + 0.5 * x.dot(&(h * x));
    let mut x = project(&Vector4::zeros());
    for _ in 0..20 {
        let grad = g + h * x;
        let mut active = [false; 4];
        for i in 0..4 {
            active[i] = (x[i] <= lo[i] && grad[i] > 0.0) || (x[i] >= hi[i] && grad[i] < 0.0);
        }
        let dx = -masked_solve(h, &grad, &active)?;
        if dx.amax() < 1e-13 {
            break;
        }
        let f0 = objective(&x);
        let mut step = 1.0;
        let next = loop {
            let cand = project(&(x + dx * step));
            if objective(&cand) <= f0 + 1e-4 * grad.dot(&(cand - x)) {
                break Some(cand);
            }
            step *= 0.5;
            if step < 1e-10 {
                break None;
            }
        };
        match next {
            Some(n) if (n - x).amax() > 1e-14 => x = n,
            _ => break,
        }
    }
    let mut clamped = [false; 4];
    for i in 0..4 {
        clamped[i] = x[i] <= lo[i] || x[i] >= hi[i];
    }
    Some((x, clamped))
}

/// Solves `H_ff · x_f = b_f` on the free components; the others are zero.
fn masked_solve(h: &Matrix4<f64>, b: &Vector4<f64>, clamped: &[bool; 4]) -> Option<Vector4<f64>> {
    let mut hm = *h;
    let mut bm = *b;
    for i in 0..4 {
        if clamped[i] {
            hm.row_mut(i).fill(0.0);
            hm.column_mut(i).fill(0.0);
            hm[(i, i)] = 1.0;
            bm[i] = 0.0;
        }
    }
    hm.cholesky().map(|c| c.solve(&bm))
}

struct Problem<'a> {
    dyn_: Dynamics,
    params: &'a MpcParams,
    refs: Vec<Node>,
    u_ref: Vec<Vector4<f64>>,
    weights: Tangent,
    x0: Node,
}

impl Problem<'_> {
    fn rollout(&self, inputs: &[Vector4<f64>]) -> Vec<Node> {
        let mut xs = Vec::with_capacity(inputs.len() + 1);
        xs.push(self.x0);
        for u in inputs {
            let next = self.dyn_.step(xs.last().unwrap(), u, self.params.dt);
            xs.push(next);
        }
        xs
    }

    fn cost(&self, xs: &[Node], us: &[Vector4<f64>]) -> f64 {
        let mut c = 0.0;
        for (x, r) in xs.iter().zip(&self.refs).skip(1) {
            let d = x.minus(r);
            c += 0.5 * d.component_mul(&d).dot(&self.weights);
        }
        for (u, ur) in us.iter().zip(&self.u_ref) {
            c += 0.5 * self.params.r_thrust * (u - ur).norm_squared();
        }
        c
    }

    fn linearize(&self, x: &Node, u: &Vector4<f64>, next: &Node) -> (MatX, MatB) {
        const EPS: f64 = 1e-6;
        let dt = self.params.dt;
        let mut a = MatX::zeros();
        for i in 0..NX {
            let mut d = Tangent::zeros();
            d[i] = EPS;
            let col = self.dyn_.step(&x.retract(&d), u, dt).minus(next) / EPS;
            a.set_column(i, &col);
        }
        let mut b = MatB::zeros();
        for j in 0..4 {
            let mut up = *u;
            up[j] += EPS;
            let col = self.dyn_.step(x, &up, dt).minus(next) / EPS;
            b.set_column(j, &col);
        }
        (a, b)
    }

    /// Riccati recursion with box-constrained input steps. Returns
    /// feedforward and feedback terms, or `None` if `Q_uu` lost
    /// definiteness at regularisation `mu`.
    fn backward(
        &self,
        xs: &[Node],
        us: &[Vector4<f64>],
        jac: &[(MatX, MatB)],
        mu: f64,
    ) -> Option<(Vec<Vector4<f64>>, Vec<MatK>)> {
        let n = us.len();
        let w = MatX::from_diagonal(&self.weights);
        let r = Matrix4::identity() * self.params.r_thrust;
        let mut vx = w * xs[n].minus(&self.refs[n]);
        let mut vxx = w;
        let mut ks = vec![Vector4::zeros(); n];
        let mut kk = vec![MatK::zeros(); n];
        for k in (0..n).rev() {
            let (a, b) = &jac[k];
            let (lx, lxx) = if k > 0 {
                (w * xs[k].minus(&self.refs[k]), w)
            } else {
                (Tangent::zeros(), MatX::zeros())
            };
            let qx = lx + a.transpose() * vx;
            let qu = r * (us[k] - self.u_ref[k]) + b.transpose() * vx;
            let vxx_a = vxx * a;
            let qxx = lxx + a.transpose() * vxx_a;
            let quu = r + b.transpose() * vxx * b + Matrix4::identity() * mu;
            let qux = b.transpose() * vxx_a;
            let (kf, clamped) = box_qp(&quu, &qu, &(self.dyn_.lo - us[k]), &(self.dyn_.hi - us[k]))?;
            let mut fb = MatK::zeros();
            for j in 0..NX {
                let col = masked_solve(&quu, &qux.column(j).into_owned(), &clamped)?;
                fb.set_column(j, &-col);
            }
            vx = qx + fb.transpose() * (quu * kf) + fb.transpose() * qu + qux.transpose() * kf;
            vxx = qxx + fb.transpose() * quu * fb + fb.transpose() * qux + qux.transpose() * fb;
            vxx = (vxx + vxx.transpose()) * 0.5;
            ks[k] = kf;
            kk[k] = fb;
        }
        Some((ks, kk))
    }

    fn forward(&self, xs: &[Node], us: &[Vector4<f64>], ks: &[Vector4<f64>], kk: &[MatK], alpha: f64) -> (Vec<Node>, Vec<Vector4<f64>>) {
        let mut nx = Vec::with_capacity(xs.len());
        let mut nu = Vec::with_capacity(us.len());
        nx.push(self.x0);
        for k in 0..us.len() {
            let dx = nx[k].minus(&xs[k]);
            let u = self.dyn_.clamp(&(us[k] + ks[k] * alpha + kk[k] * dx));
            nx.push(self.dyn_.step(&nx[k], &u, self.params.dt));
            nu.push(u);
        }
        (nx, nu)
    }
}

fn reference_input(sp: &Setpoint, model: &QuadrotorModel) -> Vector4<f64> {
    let u = match sp.input.actuation {
        Actuation::Thrusts(f) => f,
        Actuation::CollectiveThrustBodyrate { .. } => sp.state.fd,
    };
    if u.iter().all(|x| x.is_finite()) && u.sum() > 0.0 {
        model.clamp_thrusts(&u)
    } else {
        Vector4::repeat(model.hover_thrust().clamp(model.f_min, model.f_max))
    }
}

/// Solves one MPC problem from `initial` (or the reference inputs when
/// `None`).
fn solve(
    state: &QuadState,
    setpoints: &[Setpoint],
    model: &QuadrotorModel,
    params: &MpcParams,
    initial: Option<&[Vector4<f64>]>,
) -> Result<MpcSolution, PipelineError> {
    if !state.is_valid() {
        return Err(PipelineError::InvalidArgument("mpc: state is not finite".into()));
    }
    if setpoints.len() != params.horizon {
        return Err(PipelineError::InvalidArgument(format!(
            "mpc: expected {} setpoints, got {}",
            params.horizon,
            setpoints.len()
        )));
    }
    if setpoints.iter().any(|s| !s.state.is_valid()) {
        return Err(PipelineError::InvalidArgument("mpc: setpoint is not finite".into()));
    }
    let prob = Problem {
        dyn_: Dynamics::new(model),
        params,
        refs: setpoints.iter().map(|s| Node::from_state(&s.state)).collect(),
        u_ref: setpoints[..params.horizon - 1].iter().map(|s| reference_input(s, model)).collect(),
        weights: params.state_weights(),
        x0: Node::from_state(state),
    };

    let mut us: Vec<Vector4<f64>> = prob.u_ref.clone();
    let mut xs = prob.rollout(&us);
    let mut cost = prob.cost(&xs, &us);
    if let Some(guess) = initial {
        let guess: Vec<_> = guess.iter().map(|u| prob.dyn_.clamp(u)).collect();
        let gx = prob.rollout(&guess);
        let gc = prob.cost(&gx, &guess);
        if gc < cost {
            (us, xs, cost) = (guess, gx, gc);
        }
    }

    let mut mu = 0.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iterations {
        iterations += 1;
        let jac: Vec<_> = (0..us.len()).map(|k| prob.linearize(&xs[k], &us[k], &xs[k + 1])).collect();
        let Some((ks, kk)) = prob.backward(&xs, &us, &jac, mu) else {
            mu = (mu * 10.0).max(1e-6);
            continue;
        };
        let mut accepted = None;
        for alpha in [1.0, 0.5, 0.25, 0.125, 0.0625] {
            let (nx, nu) = prob.forward(&xs, &us, &ks, &kk, alpha);
            let nc = prob.cost(&nx, &nu);
            if nc.is_finite() && nc <= cost {
                accepted = Some((nx, nu, nc));
                break;
            }
        }
        match accepted {
            Some((nx, nu, nc)) => {
                let decrease = cost - nc;
                (xs, us, cost) = (nx, nu, nc);
                mu *= 0.1;
                if decrease <= params.tolerance * cost.max(f64::MIN_POSITIVE) || decrease == 0.0 {
                    converged = true;
                    break;
                }
            }
            None => {
                // No descent along the Newton direction: a stationary point
                // up to the linearisation error.
                converged = true;
                break;
            }
        }
    }

    let t0 = state.t;
    let u0 = prob.dyn_.clamp(&us[0]);
    let predicted = xs
        .iter()
        .enumerate()
        .map(|(k, x)| QuadState {
            t: t0 + k as f64 * params.dt,
            p: x.p,
            q: x.q,
            v: x.v,
            w: x.w,
            fd: us[k.min(us.len() - 1)],
            f: us[k.min(us.len() - 1)],
            ..QuadState::default()
        })
        .collect();
    let command = match params.output {
        MpcOutput::Thrusts => Command::thrusts(t0, u0),
        MpcOutput::CollectiveBodyrate => {
            let w = xs[1].w.map(|x| x.clamp(-model.w_max, model.w_max));
            Command::collective_bodyrate(t0, u0.sum(), w)
        }
    };
    Ok(MpcSolution {
        command,
        predicted,
        inputs: us,
        iterations,
        converged,
        cost,
    })
}

/// Cold-started MPC solve.
pub fn control_mpc(
    state: &QuadState,
    setpoints: &[Setpoint],
    model: &QuadrotorModel,
    params: &MpcParams,
) -> Result<MpcSolution, PipelineError> {
    params.validate()?;
    solve(state, setpoints, model, params, None)
}

/// MPC that warm-starts from its previous solution shifted by the time
/// elapsed since that solve.
#[derive(Debug, Clone)]
pub struct MpcController {
    params: MpcParams,
    previous: Option<(f64, Vec<Vector4<f64>>)>,
}

impl MpcController {
    pub fn new(params: MpcParams) -> Result<Self, PipelineError> {
        params.validate()?;
        Ok(Self { params, previous: None })
    }

    pub fn params(&self) -> &MpcParams {
        &self.params
    }

    pub fn solve(&mut self, state: &QuadState, setpoints: &[Setpoint], model: &QuadrotorModel) -> Result<MpcSolution, PipelineError> {
        let guess = self.previous.as_ref().map(|(t, us)| shift_inputs(us, (state.t - t) / self.params.dt));
        let sol = solve(state, setpoints, model, &self.params, guess.as_deref())?;
        self.previous = Some((state.t, sol.inputs.clone()));
        Ok(sol)
    }
}

/// Resamples a piecewise-constant input sequence `shift` intervals later,
/// holding the last input.
fn shift_inputs(us: &[Vector4<f64>], shift: f64) -> Vec<Vector4<f64>> {
    let n = us.len();
    (0..n)
        .map(|k| {
            let s = (k as f64 + shift.max(0.0)).floor() as usize;
            us[s.min(n - 1)]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::references::hover_setpoint;
    use approx::assert_abs_diff_eq;

    fn hover_refs(p: Vector3<f64>, params: &MpcParams, m: &QuadrotorModel) -> Vec<Setpoint> {
        (0..params.horizon)
            .map(|k| hover_setpoint(k as f64 * params.dt, p, 0.0, m))
            .collect()
    }

    #[test]
    fn hover_fixed_point() {
        let m = QuadrotorModel::default();
        let params = MpcParams::default();
        let state = QuadState::at_rest(0.0, Vector3::new(0.0, 0.0, 1.0), 0.0);
        let sol = control_mpc(&state, &hover_refs(state.p, &params, &m), &m, &params).unwrap();
        for f in sol.command.single_rotor_thrusts().unwrap().iter() {
            assert_abs_diff_eq!(*f, m.hover_thrust(), epsilon = 1e-4);
        }
        assert!(sol.iterations <= 3);
        assert!(sol.converged);
    }

    #[test]
    fn climbs_towards_reference_above() {
        let m = QuadrotorModel::default();
        let params = MpcParams::default();
        let state = QuadState::at_rest(0.0, Vector3::zeros(), 0.0);
        let target = Vector3::new(0.0, 0.0, 1.0);
        let sol = control_mpc(&state, &hover_refs(target, &params, &m), &m, &params).unwrap();
        let ct: f64 = sol.command.single_rotor_thrusts().unwrap().sum();
        assert!(ct > m.mass * m.g);
        let terminal = sol.predicted.last().unwrap().p;
        assert!((terminal - target).norm() < (state.p - target).norm());
    }

    #[test]
    fn large_step_respects_box() {
        let m = QuadrotorModel::default();
        let params = MpcParams::default();
        let state = QuadState::at_rest(0.0, Vector3::zeros(), 0.0);
        let sol = control_mpc(&state, &hover_refs(Vector3::new(50.0, 0.0, 50.0), &params, &m), &m, &params).unwrap();
        for u in &sol.inputs {
            assert!(u.iter().all(|f| *f >= m.f_min && *f <= m.f_max));
        }
    }

    #[test]
    fn nan_state_rejected() {
        let m = QuadrotorModel::default();
        let params = MpcParams::default();
        let mut state = QuadState::default();
        state.p.x = f64::NAN;
        let err = control_mpc(&state, &hover_refs(Vector3::zeros(), &params, &m), &m, &params).unwrap_err();
        assert!(matches!(err, PipelineError::InvalidArgument(_)));
    }

    #[test]
    fn params_validation() {
        assert!(MpcParams { horizon: 4, ..MpcParams::default() }.validate().is_err());
        assert!(MpcParams { dt: 0.0, ..MpcParams::default() }.validate().is_err());
        let zero = MpcParams {
            q_position: 0.0,
            q_attitude: 0.0,
            q_velocity: 0.0,
            q_bodyrate: 0.0,
            ..MpcParams::default()
        };
        assert!(zero.validate().is_err());
    }

    #[test]
    fn box_qp_matches_unconstrained_inside() {
        let h = Matrix4::from_diagonal(&Vector4::new(2.0, 3.0, 4.0, 5.0));
        let g = Vector4::new(-2.0, 3.0, -1.0, 0.5);
        let (x, clamped) = box_qp(&h, &g, &Vector4::repeat(-10.0), &Vector4::repeat(10.0)).unwrap();
        assert!((x - Vector4::new(1.0, -1.0, 0.25, -0.1)).amax() < 1e-12);
        assert_eq!(clamped, [false; 4]);
        let (x, clamped) = box_qp(&h, &g, &Vector4::repeat(-0.5), &Vector4::repeat(0.5)).unwrap();
        assert!((x - Vector4::new(0.5, -0.5, 0.25, -0.1)).amax() < 1e-12);
        assert_eq!(clamped, [true, true, false, false]);
    }

    #[test]
    fn warm_start_shift() {
        let us: Vec<_> = (0..4).map(|k| Vector4::repeat(k as f64)).collect();
        let s = shift_inputs(&us, 1.0);
        assert_eq!(s[0], us[1]);
        assert_eq!(s[3], us[3]);
    }

    #[test]
    fn rk4_hover_is_stationary() {
        let m = QuadrotorModel::default();
        let d = Dynamics::new(&m);
        let x = Node::from_state(&QuadState::default());
        let next = d.step(&x, &Vector4::repeat(m.hover_thrust()), 0.05);
        assert!(next.minus(&x).amax() < 1e-14);
    }
}
