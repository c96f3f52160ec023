//! The co-moving frame of the target and the structural decomposition.
//!
//! The frame operator `S(t)` solves `dS/dt = skew(w_g(t)) S` from `S(0) = I`
//! and is an isometry of the sphere for all time: it carries the target's
//! initial position onto its current one while preserving norms and inner
//! products. Writing `q_i = S x_i` splits each agent into the rigid motion
//! shared with the target and a structural remainder `(x_i, v_i)` whose
//! dynamics is autonomous: the target enters it only through the constant
//! anchor `x_g = q_g(0)` and an extra control `A_i` tangent at `x_i`.
//!
//! Integrating the ambient system with the full-information control is
//! equivalent to integrating the structural system with `A_i = 0` and
//! composing with the frame; the zero-control law corresponds to the specific
//! `A_i` produced by [`zero_control_structural_a`].

use thiserror::Error;

use crate::dynamics::{ModelParams, SystemState, TargetPhase};
use crate::geom::{cross, skew, GeomError, Matrix3, SpherePoint, TangentVector, Vec3};

/// Tolerance on `S^T S = I` accepted when constructing a frame directly.
pub const FRAME_ORTHOGONALITY_TOL: f64 = 1e-9;

/// Tolerance on `<A_i, x_i> = 0` for structural controls.
pub const TANGENT_CONTROL_TOL: f64 = 1e-8;

/// Admissibility slack used when typing states produced by numerical
/// integration; the drift itself is monitored by the simulator.
pub(crate) const RUNTIME_ADMISSIBILITY_TOL: f64 = 1e-2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("frame matrix is not orthogonal: max |S^T S - I| = {deviation:.3e}")]
    NotOrthogonal { deviation: f64 },
    #[error("structural control for agent {agent} is not tangent: <A, x> = {deviation:.3e}")]
    NonTangentControl { agent: usize, deviation: f64 },
    #[error("structural state and control lists have mismatched lengths")]
    LengthMismatch,
}

/// The rigid-motion operator `S(t)` together with its time stamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameState {
    pub s: Matrix3,
    pub t: f64,
}

impl FrameState {
    /// The frame at time zero.
    pub fn identity() -> Self {
        FrameState {
            s: Matrix3::identity(),
            t: 0.0,
        }
    }

    pub fn try_new(s: Matrix3, t: f64) -> Result<Self, FrameError> {
        let deviation = s.transpose().mul_mat(s).max_abs_diff(Matrix3::identity());
        if deviation > FRAME_ORTHOGONALITY_TOL {
            return Err(FrameError::NotOrthogonal { deviation });
        }
        Ok(FrameState { s, t })
    }

    /// `S^{-1}`, valid because `S` is orthogonal.
    pub fn inverse(&self) -> Matrix3 {
        self.s.transpose()
    }
}

/// One symmetric Newton-Schulz sweep toward the polar factor:
/// `S <- S (3I - S^T S) / 2`. Squares the orthogonality defect, which after an
/// RK4 step is already O(dt^5).
pub(crate) fn reorthonormalize(s: Matrix3) -> Matrix3 {
    let sts = s.transpose().mul_mat(s);
    s.mul_mat(Matrix3::identity().scale(3.0) - sts).scale(0.5)
}

pub(crate) fn frame_step_raw(s: Matrix3, w: Vec3, dt: f64) -> Matrix3 {
    let gen = skew(w);
    let k1 = gen.mul_mat(s);
    let k2 = gen.mul_mat(s + k1.scale(0.5 * dt));
    let k3 = gen.mul_mat(s + k2.scale(0.5 * dt));
    let k4 = gen.mul_mat(s + k3.scale(dt));
    let stepped = s + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(dt / 6.0);
    reorthonormalize(stepped)
}

/// Advances the frame by one RK4 step of `dS/dt = skew(w) S` with `w` frozen
/// over the step, then re-orthonormalizes.
pub fn frame_step(frame: &FrameState, w: Vec3, dt: f64) -> FrameState {
    FrameState {
        s: frame_step_raw(frame.s, w, dt),
        t: frame.t + dt,
    }
}

/// Agent states in the co-moving frame, plus the fixed target anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralState {
    pub x: Vec<SpherePoint>,
    pub v: Vec<TangentVector>,
    pub x_gamma: SpherePoint,
}

impl StructuralState {
    pub fn agent_count(&self) -> usize {
        self.x.len()
    }

    pub(crate) fn from_raw(
        x: &[Vec3],
        v: &[Vec3],
        x_gamma: Vec3,
        tol: f64,
    ) -> Result<Self, GeomError> {
        let mut xs = Vec::with_capacity(x.len());
        let mut vs = Vec::with_capacity(v.len());
        for (&xi, &vi) in x.iter().zip(v.iter()) {
            let point = SpherePoint::try_new_with_tol(xi, tol)?;
            xs.push(point);
            vs.push(TangentVector::try_new_with_tol(point, vi, tol)?);
        }
        Ok(StructuralState {
            x: xs,
            v: vs,
            x_gamma: SpherePoint::try_new_with_tol(x_gamma, tol)?,
        })
    }
}

/// Maps an ambient state into the frame: `x_i = S^T q_i`,
/// `v_i = S^T (p_i - w x q_i)`, `x_g = S^T q_g`.
pub fn to_structural(
    frame: &FrameState,
    state: &SystemState,
) -> Result<StructuralState, FrameError> {
    let st = frame.inverse();
    let q_gamma = state.target.position();
    let w = cross(q_gamma, state.target.velocity());

    let x: Vec<Vec3> = state
        .agents
        .iter()
        .map(|a| st.mul_vec(a.position()))
        .collect();
    let v: Vec<Vec3> = state
        .agents
        .iter()
        .map(|a| st.mul_vec(a.velocity() - cross(w, a.position())))
        .collect();
    Ok(StructuralState::from_raw(
        &x,
        &v,
        st.mul_vec(q_gamma),
        RUNTIME_ADMISSIBILITY_TOL,
    )?)
}

/// The decomposition taken in the frame anchored at the current instant
/// (`S = I`): `x_i = q_i`, `v_i = p_i - w x q_i`, `x_g = q_g`.
///
/// Every functional of the structural state used by the analysis machinery is
/// invariant under the frame rotation, so evaluating it on this snapshot gives
/// the same value as evaluating it on [`to_structural`] output, without
/// integrating a frame.
pub fn structural_snapshot(state: &SystemState) -> Result<StructuralState, FrameError> {
    let q_gamma = state.target.position();
    let w = cross(q_gamma, state.target.velocity());
    let x: Vec<Vec3> = state.agents.iter().map(|a| a.position()).collect();
    let v: Vec<Vec3> = state
        .agents
        .iter()
        .map(|a| a.velocity() - cross(w, a.position()))
        .collect();
    Ok(StructuralState::from_raw(
        &x,
        &v,
        q_gamma,
        RUNTIME_ADMISSIBILITY_TOL,
    )?)
}

pub(crate) fn structural_rhs_raw(
    x: &[Vec3],
    v: &[Vec3],
    x_gamma: Vec3,
    params: &ModelParams,
    a_ctrl: &[Vec3],
    dx_out: &mut [Vec3],
    dv_out: &mut [Vec3],
) {
    let n = x.len();
    let n_inv = 1.0 / n as f64;
    for i in 0..n {
        let xi = x[i];
        let vi = v[i];
        let xi_sq = xi.norm_squared();

        let mut dv = xi * (-vi.norm_squared() / xi_sq);
        let mut cooperative = Vec3::ZERO;
        for j in 0..n {
            let sigma_ij = params.sigma.at((xi - x[j]).norm_squared());
            cooperative += sigma_ij * (xi_sq * x[j] - xi.dot(x[j]) * xi);
        }
        dv += cooperative * n_inv;
        dv += params.c_q * (xi_sq * x_gamma - xi.dot(x_gamma) * xi);
        dv -= params.c_p * vi;
        dv += a_ctrl[i];

        dx_out[i] = vi;
        dv_out[i] = dv;
    }
}

/// Per-agent derivatives of the structural system. The controls `A_i` must be
/// tangent at the corresponding `x_i`.
pub fn structural_rhs(
    s: &StructuralState,
    params: &ModelParams,
    a_ctrl: &[Vec3],
) -> Result<Vec<(Vec3, Vec3)>, FrameError> {
    let n = s.agent_count();
    if a_ctrl.len() != n {
        return Err(FrameError::LengthMismatch);
    }
    for (i, (a, x)) in a_ctrl.iter().zip(s.x.iter()).enumerate() {
        let deviation = a.dot(x.as_vec3());
        if deviation.abs() > TANGENT_CONTROL_TOL * (1.0 + a.norm()) {
            return Err(FrameError::NonTangentControl {
                agent: i,
                deviation,
            });
        }
    }

    let x: Vec<Vec3> = s.x.iter().map(|p| p.as_vec3()).collect();
    let v: Vec<Vec3> = s.v.iter().map(|t| t.as_vec3()).collect();
    let mut dx = vec![Vec3::ZERO; n];
    let mut dv = vec![Vec3::ZERO; n];
    structural_rhs_raw(
        &x,
        &v,
        s.x_gamma.as_vec3(),
        params,
        a_ctrl,
        &mut dx,
        &mut dv,
    );
    Ok(dx.into_iter().zip(dv).collect())
}

/// Inverse of [`to_structural`]: `q_i = S x_i`, `p_i = w x q_i + S v_i`, with
/// the target rebuilt from the anchor (`q_g = S x_g`, `p_g = w x q_g`).
pub fn reconstruct(
    frame: &FrameState,
    s: &StructuralState,
    w: Vec3,
) -> Result<SystemState, FrameError> {
    let q_gamma = frame.s.mul_vec(s.x_gamma.as_vec3());
    let p_gamma = cross(w, q_gamma);
    let target = TargetPhase::project(q_gamma, p_gamma)
        .map_err(|_| FrameError::Geom(GeomError::NonFinite))?;

    let mut agents = Vec::with_capacity(s.agent_count());
    for (x, v) in s.x.iter().zip(s.v.iter()) {
        let q = frame.s.mul_vec(x.as_vec3());
        let p = cross(w, q) + frame.s.mul_vec(v.as_vec3());
        let point = SpherePoint::try_new_with_tol(q, RUNTIME_ADMISSIBILITY_TOL)?;
        let tangent = TangentVector::try_new_with_tol(point, p, RUNTIME_ADMISSIBILITY_TOL)?;
        agents.push(TargetPhase::new(point, tangent).map_err(|_| FrameError::LengthMismatch)?);
    }
    Ok(SystemState {
        t: frame.t,
        agents,
        target,
    })
}

/// The structural control equivalent to the zero ambient control:
/// `A_i = -S^T U_full(q_i, p_i)` where `U_full` is the full-information
/// control ([`crate::dynamics::extra_control_u1`]) evaluated on the
/// reconstructed ambient phase `q_i = S x_i`, `p_i = w x q_i + S v_i`.
pub fn zero_control_structural_a(
    frame: &FrameState,
    s: &StructuralState,
    w: Vec3,
    dw: Vec3,
) -> Vec<Vec3> {
    let st = frame.inverse();
    s.x.iter()
        .zip(s.v.iter())
        .map(|(x, v)| {
            let q = frame.s.mul_vec(x.as_vec3());
            let p = cross(w, q) + frame.s.mul_vec(v.as_vec3());
            -1.0 * st.mul_vec(crate::dynamics::extra_control_u1_raw(q, p, w, dw))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{AgentPhase, ControlMode};
    use crate::rng::SplitMix64;

    fn phase(q: Vec3, p: Vec3) -> AgentPhase {
        AgentPhase::project(q, p).unwrap()
    }

    #[test]
    fn zero_generator_keeps_identity() {
        let mut frame = FrameState::identity();
        for _ in 0..100 {
            frame = frame_step(&frame, Vec3::ZERO, 1e-2);
        }
        assert!(frame.s.max_abs_diff(Matrix3::identity()) < 1e-14);
    }

    #[test]
    fn constant_generator_matches_rotation() {
        // w = e_z rotates about the z-axis by the elapsed angle; the step is
        // chosen so the steps land exactly on a quarter turn.
        let mut frame = FrameState::identity();
        let steps = 1571usize;
        let dt = std::f64::consts::FRAC_PI_2 / steps as f64;
        for _ in 0..steps {
            frame = frame_step(&frame, Vec3::EZ, dt);
        }
        let err = (frame.s.mul_vec(Vec3::EX) - Vec3::EY).norm();
        assert!(err < 1e-8, "S(pi/2) e1 misses e2 by {err:.3e}");
    }

    #[test]
    fn frame_is_isometry_under_arbitrary_generators() {
        let mut rng = SplitMix64::new(17);
        let mut frame = FrameState::identity();
        for _ in 0..500 {
            frame = frame_step(&frame, rng.vec3_in_cube(2.0), 1e-2);
        }
        for _ in 0..20 {
            let x = rng.vec3_in_cube(3.0);
            let y = rng.vec3_in_cube(3.0);
            assert!((frame.s.mul_vec(x).norm() - x.norm()).abs() < 1e-9);
            let ip_err = (frame.s.mul_vec(x).dot(frame.s.mul_vec(y)) - x.dot(y)).abs();
            assert!(ip_err < 1e-9);
        }
        assert!(
            frame
                .s
                .transpose()
                .mul_mat(frame.s)
                .max_abs_diff(Matrix3::identity())
                < 1e-12
        );
    }

    #[test]
    fn initial_frame_decomposition() {
        let target = phase(Vec3::EZ, Vec3::new(0.3, -0.2, 0.0));
        let agent = phase(Vec3::EX, Vec3::new(0.0, 0.4, -0.1));
        let state = SystemState::new(0.0, vec![agent], target).unwrap();
        let s = to_structural(&FrameState::identity(), &state).unwrap();

        let w = cross(target.position(), target.velocity());
        assert!((s.x[0].as_vec3() - agent.position()).norm() < 1e-15);
        let expected_v = agent.velocity() - cross(w, agent.position());
        assert!((s.v[0].as_vec3() - expected_v).norm() < 1e-14);
        assert!((s.x_gamma.as_vec3() - target.position()).norm() < 1e-15);
    }

    #[test]
    fn co_rotating_agent_has_zero_structural_velocity() {
        let target = phase(Vec3::EZ, Vec3::new(0.5, 0.0, 0.0));
        let w = cross(target.position(), target.velocity());
        let q = target.position();
        let agent = phase(q, cross(w, q));
        let state = SystemState::new(0.0, vec![agent], target).unwrap();
        let s = to_structural(&FrameState::identity(), &state).unwrap();
        assert!(s.v[0].as_vec3().norm() < 1e-14);
    }

    #[test]
    fn round_trip_through_an_evolved_frame() {
        let mut rng = SplitMix64::new(29);
        let target = phase(rng.unit_vector(), rng.vec3_in_cube(0.5));
        let agents: Vec<_> = (0..4)
            .map(|_| phase(rng.unit_vector(), rng.vec3_in_cube(0.5)))
            .collect();
        let state = SystemState::new(1.5, agents, target).unwrap();

        let mut frame = FrameState::identity();
        for _ in 0..150 {
            frame = frame_step(&frame, rng.vec3_in_cube(1.0), 1e-2);
        }
        frame.t = 1.5;

        let w = cross(target.position(), target.velocity());
        let s = to_structural(&frame, &state).unwrap();
        let rebuilt = reconstruct(&frame, &s, w).unwrap();

        for (orig, back) in state.agents.iter().zip(rebuilt.agents.iter()) {
            assert!((orig.position() - back.position()).norm() < 1e-12);
            assert!((orig.velocity() - back.velocity()).norm() < 1e-12);
        }
        assert!((rebuilt.target.position() - target.position()).norm() < 1e-12);
        assert!((rebuilt.target.velocity() - target.velocity()).norm() < 1e-12);
    }

    #[test]
    fn rendezvous_configuration_is_an_equilibrium() {
        let x_gamma = SpherePoint::try_new(Vec3::EZ).unwrap();
        let x = vec![x_gamma; 3];
        let v: Vec<_> = x
            .iter()
            .map(|&p| TangentVector::try_new(p, Vec3::ZERO).unwrap())
            .collect();
        let s = StructuralState { x, v, x_gamma };
        let params = ModelParams::new(1.0, 5.0, 0.1, ControlMode::FullInfo);
        let derivs = structural_rhs(&s, &params, &[Vec3::ZERO; 3]).unwrap();
        for (dx, dv) in derivs {
            assert!(dx.norm() < 1e-15);
            assert!(dv.norm() < 1e-14);
        }
    }

    #[test]
    fn bonding_term_in_the_frame() {
        let x_gamma = SpherePoint::try_new(Vec3::EZ).unwrap();
        let x0 = SpherePoint::try_new(Vec3::EX).unwrap();
        let s = StructuralState {
            x: vec![x0],
            v: vec![TangentVector::try_new(x0, Vec3::ZERO).unwrap()],
            x_gamma,
        };
        let params = ModelParams::new(0.0, 1.0, 0.0, ControlMode::ZeroControl);
        let derivs = structural_rhs(&s, &params, &[Vec3::ZERO]).unwrap();
        assert!((derivs[0].1 - Vec3::EZ).norm() < 1e-15);
    }

    #[test]
    fn balanced_steady_state_has_zero_rhs() {
        // v_i = 0 and (sigma/N) sum x_j + c_q x_g = 0 with c_q < sigma:
        // the second invariant set of the energy analysis.
        let sigma = 1.0;
        let c_q = 0.5;
        let c: f64 = c_q / sigma;
        let s_comp = (1.0 - c * c).sqrt();
        let x1 = SpherePoint::try_new(Vec3::new(s_comp, 0.0, -c)).unwrap();
        let x2 = SpherePoint::try_new(Vec3::new(-s_comp, 0.0, -c)).unwrap();
        let x_gamma = SpherePoint::try_new(Vec3::EZ).unwrap();
        let s = StructuralState {
            x: vec![x1, x2],
            v: vec![
                TangentVector::try_new(x1, Vec3::ZERO).unwrap(),
                TangentVector::try_new(x2, Vec3::ZERO).unwrap(),
            ],
            x_gamma,
        };
        let params = ModelParams::new(sigma, c_q, 0.0, ControlMode::ZeroControl);
        let derivs = structural_rhs(&s, &params, &[Vec3::ZERO; 2]).unwrap();
        for (_, dv) in derivs {
            assert!(dv.norm() < 1e-15, "steady state not stationary: {dv:?}");
        }
    }

    #[test]
    fn non_tangent_control_is_rejected() {
        let x0 = SpherePoint::try_new(Vec3::EX).unwrap();
        let s = StructuralState {
            x: vec![x0],
            v: vec![TangentVector::try_new(x0, Vec3::ZERO).unwrap()],
            x_gamma: SpherePoint::try_new(Vec3::EZ).unwrap(),
        };
        let params = ModelParams::new(1.0, 1.0, 1.0, ControlMode::ZeroControl);
        assert!(matches!(
            structural_rhs(&s, &params, &[Vec3::EX]),
            Err(FrameError::NonTangentControl { agent: 0, .. })
        ));
    }

    #[test]
    fn zero_control_a_is_tangent() {
        let mut rng = SplitMix64::new(31);
        let target = phase(rng.unit_vector(), rng.vec3_in_cube(0.6));
        let agents: Vec<_> = (0..3)
            .map(|_| phase(rng.unit_vector(), rng.vec3_in_cube(0.6)))
            .collect();
        let state = SystemState::new(0.0, agents, target).unwrap();
        let frame = FrameState::identity();
        let s = to_structural(&frame, &state).unwrap();
        let (w, dw) = crate::dynamics::angular_state(&state.target, Vec3::new(0.2, -0.1, 0.4));
        let a = zero_control_structural_a(&frame, &s, w, dw);
        for (ai, xi) in a.iter().zip(s.x.iter()) {
            assert!(ai.dot(xi.as_vec3()).abs() < 1e-12);
        }
    }
}
