//! Right-hand sides for the target system and the multi-agent tracking system.
//!
//! The target `(q_g, p_g)` moves on the sphere under a raw control `u_g(t)`
//! projected onto its tangent plane. Each tracking agent feels, in order: a
//! centripetal term holding it to the sphere, a cooperative term toward the
//! other agents, a bonding term toward the target, a velocity-alignment term
//! transporting the target velocity through the regularized rotation operator,
//! and an extra control that is either the full-information law (position,
//! velocity and acceleration of the target) or zero.
//!
//! Two optional terms from the experiments are supported: a rotational
//! flocking term built on the Rodrigues operator (gain `psi`) and a radial
//! feedback `-k0 (q - q/||q||)` pushing drifting agents back to the sphere.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::geom::{
    cross, p_apply_raw, rodrigues_raw, tangent_project_raw, GeomError, SpherePoint, TangentVector,
    Vec3,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("a system needs at least one agent")]
    NoAgents,
    #[error("tangent vector base does not match the phase position")]
    MismatchedBase,
}

/// Phase `(q, p)` of the externally prescribed target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetPhase {
    pub q: SpherePoint,
    pub p: TangentVector,
}

impl TargetPhase {
    pub fn new(q: SpherePoint, p: TangentVector) -> Result<Self, DynamicsError> {
        if p.base() != q {
            return Err(DynamicsError::MismatchedBase);
        }
        Ok(TargetPhase { q, p })
    }

    /// Builds an admissible phase from raw vectors, normalizing the position
    /// and projecting the velocity onto its tangent plane.
    pub fn project(q: Vec3, p: Vec3) -> Result<Self, DynamicsError> {
        let q = SpherePoint::project(q)?;
        let p = TangentVector::project(q, p)?;
        Ok(TargetPhase { q, p })
    }

    pub fn position(&self) -> Vec3 {
        self.q.as_vec3()
    }

    pub fn velocity(&self) -> Vec3 {
        self.p.as_vec3()
    }
}

/// Phase `(q, p)` of one tracking agent. Same admissibility contract as the
/// target.
pub type AgentPhase = TargetPhase;

/// The full simulation state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: f64,
    pub agents: Vec<AgentPhase>,
    pub target: TargetPhase,
}

impl SystemState {
    pub fn new(
        t: f64,
        agents: Vec<AgentPhase>,
        target: TargetPhase,
    ) -> Result<Self, DynamicsError> {
        if agents.is_empty() {
            return Err(DynamicsError::NoAgents);
        }
        Ok(SystemState { t, agents, target })
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }
}

/// Inter-agent gain: a positive constant, or a function of the squared
/// chordal distance between the two agents' current positions.
#[derive(Clone)]
pub enum SigmaModel {
    Constant(f64),
    DistanceDependent(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl SigmaModel {
    pub fn at(&self, dist_sq: f64) -> f64 {
        match self {
            SigmaModel::Constant(s) => *s,
            SigmaModel::DistanceDependent(f) => f(dist_sq),
        }
    }

    /// The constant value, when there is one. The linearized-system and
    /// energy machinery is only defined for constant sigma.
    pub fn constant(&self) -> Option<f64> {
        match self {
            SigmaModel::Constant(s) => Some(*s),
            SigmaModel::DistanceDependent(_) => None,
        }
    }
}

impl fmt::Debug for SigmaModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaModel::Constant(s) => write!(f, "SigmaModel::Constant({s})"),
            SigmaModel::DistanceDependent(_) => write!(f, "SigmaModel::DistanceDependent(..)"),
        }
    }
}

/// Which extra control the agents apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlMode {
    /// `U_i = 2 <w_g, q_i> (q_i x p_i) + dw_g x q_i`: requires the target's
    /// acceleration (through `dw_g`) and yields complete rendezvous.
    FullInfo,
    /// `U_i = 0`: position and velocity only; yields practical rendezvous for
    /// large gains.
    ZeroControl,
}

/// Model coefficients shared by the spherical and flat systems.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub sigma: SigmaModel,
    pub c_q: f64,
    pub c_p: f64,
    /// Flocking gain; zero disables the term (the default, and the setting the
    /// quantitative results assume).
    pub psi: f64,
    /// Radial feedback gain; zero disables the term.
    pub k0: f64,
    pub control_mode: ControlMode,
}

impl ModelParams {
    pub fn new(sigma: f64, c_q: f64, c_p: f64, control_mode: ControlMode) -> Self {
        assert!(sigma >= 0.0, "sigma must be nonnegative");
        ModelParams {
            sigma: SigmaModel::Constant(sigma),
            c_q,
            c_p,
            psi: 0.0,
            k0: 0.0,
            control_mode,
        }
    }

    pub fn with_psi(mut self, psi: f64) -> Self {
        assert!(psi >= 0.0, "psi must be nonnegative");
        self.psi = psi;
        self
    }

    pub fn with_k0(mut self, k0: f64) -> Self {
        assert!(k0 >= 0.0, "k0 must be nonnegative");
        self.k0 = k0;
        self
    }

    pub fn with_sigma_fn(mut self, f: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> Self {
        self.sigma = SigmaModel::DistanceDependent(f);
        self
    }
}

/// The raw target control `u_g(t)`; the dynamics projects it tangentially.
/// Callers must supply a continuous function of time.
#[derive(Clone)]
pub struct TargetControl {
    f: Arc<dyn Fn(f64) -> Vec3 + Send + Sync>,
}

impl TargetControl {
    pub fn new(f: impl Fn(f64) -> Vec3 + Send + Sync + 'static) -> Self {
        TargetControl { f: Arc::new(f) }
    }

    /// The control used throughout the experiments:
    /// `u_g(t) = a (cos t, sin t, 1)`.
    pub fn circular(amplitude: f64) -> Self {
        TargetControl::new(move |t| Vec3::new(amplitude * t.cos(), amplitude * t.sin(), amplitude))
    }

    pub fn zero() -> Self {
        TargetControl::new(|_| Vec3::ZERO)
    }

    pub fn eval(&self, t: f64) -> Vec3 {
        (self.f)(t)
    }
}

impl fmt::Debug for TargetControl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TargetControl(..)")
    }
}

pub(crate) fn target_rhs_raw(q: Vec3, p: Vec3, u_raw: Vec3) -> (Vec3, Vec3) {
    let dp = q * (-p.norm_squared() / q.norm_squared()) + tangent_project_raw(q, u_raw);
    (p, dp)
}

/// Time derivative of the target phase: `dq = p`,
/// `dp = -(||p||^2/||q||^2) q + U_g` with `U_g` the tangent projection of
/// `u_raw`. The normal component of `dp` is exactly `-||p||^2`, which is what
/// conserves `||q||` along the flow.
pub fn target_rhs(target: &TargetPhase, u_raw: Vec3) -> (Vec3, Vec3) {
    target_rhs_raw(target.position(), target.velocity(), u_raw)
}

pub(crate) fn angular_state_raw(q: Vec3, p: Vec3, u_raw: Vec3) -> (Vec3, Vec3) {
    let w = cross(q, p);
    let dw = cross(q, tangent_project_raw(q, u_raw));
    (w, dw)
}

/// Angular velocity `w_g = q_g x p_g` of the target and its time derivative
/// `dw_g = q_g x U_g`. A free target (`u_raw = 0`) has constant angular
/// momentum.
pub fn angular_state(target: &TargetPhase, u_raw: Vec3) -> (Vec3, Vec3) {
    angular_state_raw(target.position(), target.velocity(), u_raw)
}

pub(crate) fn extra_control_u1_raw(q: Vec3, p: Vec3, w: Vec3, dw: Vec3) -> Vec3 {
    let q_sq = q.norm_squared();
    2.0 * w.dot(q) * cross(q, p) + cross(dw, q) - (w.dot(q) / q_sq) * (q_sq * w - w.dot(q) * q)
}

/// The full-information control
/// `U_i = 2 <w_g, q_i> (q_i x p_i) + dw_g x q_i - <w_g, q_i> P_{q_i} w_g`,
/// where `P_{q_i}` is the tangent projection at `q_i`.
///
/// The third summand is what makes this control exactly the ambient image of
/// the undriven co-moving system: expanding `d/dt (S v_i)` produces
/// `<q, W W q> q - W W q = -<w, q> (w - <w, q> q)` alongside the two cross-product
/// summands, and dropping it leaves a residual force of first order in the
/// tracking error (the rendezvous then stalls instead of completing). It
/// vanishes whenever `w_g` is parallel or orthogonal to `q_i`, which covers
/// every worked example. All three summands are orthogonal to `q_i`, so the
/// control never pushes an agent off the sphere.
pub fn extra_control_u1(agent: &AgentPhase, w: Vec3, dw: Vec3) -> Vec3 {
    extra_control_u1_raw(agent.position(), agent.velocity(), w, dw)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn main_rhs_raw(
    q: &[Vec3],
    p: &[Vec3],
    q_gamma: Vec3,
    p_gamma: Vec3,
    params: &ModelParams,
    u_raw: Vec3,
    dq_out: &mut [Vec3],
    dp_out: &mut [Vec3],
) -> Result<(), DynamicsError> {
    let n = q.len();
    let n_inv = 1.0 / n as f64;
    let (w, dw) = angular_state_raw(q_gamma, p_gamma, u_raw);

    for i in 0..n {
        let qi = q[i];
        let pi = p[i];
        let qi_sq = qi.norm_squared();

        let mut dp = qi * (-pi.norm_squared() / qi_sq);

        let mut cooperative = Vec3::ZERO;
        for j in 0..n {
            let sigma_ij = params.sigma.at((qi - q[j]).norm_squared());
            cooperative += sigma_ij * (qi_sq * q[j] - qi.dot(q[j]) * qi);
        }
        dp += cooperative * n_inv;

        dp += params.c_q * (qi_sq * q_gamma - qi.dot(q_gamma) * qi);
        dp += params.c_p * (p_apply_raw(q_gamma, qi, p_gamma) - pi);

        if params.control_mode == ControlMode::FullInfo {
            dp += extra_control_u1_raw(qi, pi, w, dw);
        }

        if params.psi > 0.0 {
            let mut flocking = Vec3::ZERO;
            for j in 0..n {
                let r = rodrigues_raw(q[j], qi)?;
                flocking += r.mul_vec(p[j]) - pi;
            }
            dp += flocking * (params.psi * n_inv);
        }

        if params.k0 > 0.0 {
            dp -= params.k0 * (qi - qi / qi.norm());
        }

        dq_out[i] = pi;
        dp_out[i] = dp;
    }
    Ok(())
}

/// Per-agent derivatives `(dq_i, dp_i)` of the multi-agent system.
///
/// Fails with [`GeomError::AntipodalSingularity`] only when the flocking term
/// is enabled and two agents sit at antipodal points, the one configuration
/// where the Rodrigues transport is undefined.
pub fn main_rhs(
    state: &SystemState,
    params: &ModelParams,
    u_raw: Vec3,
) -> Result<Vec<(Vec3, Vec3)>, DynamicsError> {
    let n = state.agents.len();
    let q: Vec<Vec3> = state.agents.iter().map(|a| a.position()).collect();
    let p: Vec<Vec3> = state.agents.iter().map(|a| a.velocity()).collect();
    let mut dq = vec![Vec3::ZERO; n];
    let mut dp = vec![Vec3::ZERO; n];
    main_rhs_raw(
        &q,
        &p,
        state.target.position(),
        state.target.velocity(),
        params,
        u_raw,
        &mut dq,
        &mut dp,
    )?;
    Ok(dq.into_iter().zip(dp).collect())
}
