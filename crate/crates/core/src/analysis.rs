//! Energy and Lyapunov machinery for the structural system.
//!
//! Three layers of diagnostics, all evaluated on structural coordinates (or on
//! the frame-free snapshot, which gives identical values since every
//! functional here is rotation-invariant):
//!
//! * an energy `E = E_k + E_c` that dissipates monotonically under the
//!   full-information control, with the sufficient rendezvous condition of
//!   [`complete_rendezvous_condition`];
//! * six quadratic observables `X` whose evolution closes into the linear
//!   system `dX/dt = M X + F`, with `F` quadratically small near rendezvous;
//! * per-agent weighted observables `X_i` (denominators `4 - ||x_i - x_g||^2`
//!   cancel the quartic bonding terms) obeying `dX_i/dt = M_inf X_i + F_i`.
//!
//! The spectra of `M` and `M_inf` are available in closed form and
//! cross-checked against a numeric eigensolver.

pub use num_complex::Complex64;

use thiserror::Error;

use crate::dynamics::{ModelParams, SystemState};
use crate::frame::StructuralState;
use crate::geom::{Matrix3, Vec3};

/// Agents closer than this (in `4 - ||x_i - x_g||^2`) to the target's antipode
/// make the weighted functionals blow up.
pub const ANTIPODAL_TARGET_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("this functional is only defined for a constant inter-agent gain")]
    RequiresConstantSigma,
    #[error("agent {agent} is antipodal to the target: ||x - x_g||^2 = {dist_sq:.12}")]
    AntipodalToTarget { agent: usize, dist_sq: f64 },
    #[error("control list length does not match the agent count")]
    LengthMismatch,
    #[error("agent index {index} out of range")]
    IndexOutOfRange { index: usize },
}

/// Kinetic, configuration and total energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub e_k: f64,
    pub e_c: f64,
    pub e_total: f64,
}

/// `E_k = (1/2N) sum ||v_i||^2`,
/// `E_c = (sigma/4N^2) sum_{i,j} ||x_i - x_j||^2 + (c_q/2N) sum ||x_g - x_i||^2`.
pub fn energy(s: &StructuralState, params: &ModelParams) -> Result<EnergyBreakdown, AnalysisError> {
    let sigma = params
        .sigma
        .constant()
        .ok_or(AnalysisError::RequiresConstantSigma)?;
    let n = s.agent_count() as f64;
    let xg = s.x_gamma.as_vec3();

    let e_k = s.v.iter().map(|v| v.as_vec3().norm_squared()).sum::<f64>() / (2.0 * n);

    let mut pair_sum = 0.0;
    for xi in &s.x {
        for xj in &s.x {
            pair_sum += (xi.as_vec3() - xj.as_vec3()).norm_squared();
        }
    }
    let target_sum: f64 = s.x.iter().map(|x| (xg - x.as_vec3()).norm_squared()).sum();
    let e_c = sigma / (4.0 * n * n) * pair_sum + params.c_q / (2.0 * n) * target_sum;

    Ok(EnergyBreakdown {
        e_k,
        e_c,
        e_total: e_k + e_c,
    })
}

/// Outcome of the sufficient condition for complete rendezvous.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RendezvousCondition {
    /// `c_q > sigma`: holds regardless of the initial data.
    HoldsByGain,
    /// `E(0) < (sigma/2)(1 + c_q/sigma)^2`.
    HoldsByEnergy,
    Fails,
}

pub fn complete_rendezvous_condition(
    s0: &StructuralState,
    params: &ModelParams,
) -> Result<RendezvousCondition, AnalysisError> {
    let sigma = params
        .sigma
        .constant()
        .ok_or(AnalysisError::RequiresConstantSigma)?;
    if params.c_q > sigma {
        return Ok(RendezvousCondition::HoldsByGain);
    }
    let e0 = energy(s0, params)?.e_total;
    let threshold = sigma / 2.0 * (1.0 + params.c_q / sigma).powi(2);
    if e0 < threshold {
        Ok(RendezvousCondition::HoldsByEnergy)
    } else {
        Ok(RendezvousCondition::Fails)
    }
}

/// The six auxiliary observables: target-relative `(Xg1, Xg2, Xg3)` and
/// inter-agent `(X1, X2, X3)`. The same shape carries the forcing `F`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AuxVector6 {
    pub xg1: f64,
    pub xg2: f64,
    pub xg3: f64,
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl AuxVector6 {
    pub fn to_array(self) -> [f64; 6] {
        [self.xg1, self.xg2, self.xg3, self.x1, self.x2, self.x3]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        AuxVector6 {
            xg1: a[0],
            xg2: a[1],
            xg3: a[2],
            x1: a[3],
            x2: a[4],
            x3: a[5],
        }
    }

    pub fn norm(self) -> f64 {
        self.to_array().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// The observable vector `X` alone. Unlike the forcing, it involves neither
/// the gains nor the controls, so it is always defined.
pub fn aux_state_vector(s: &StructuralState) -> AuxVector6 {
    let n = s.agent_count() as f64;
    let xg = s.x_gamma.as_vec3();

    let mut xg1 = 0.0;
    let mut xg2 = 0.0;
    let mut xg3 = 0.0;
    for (x, v) in s.x.iter().zip(s.v.iter()) {
        let d = x.as_vec3() - xg;
        xg1 += d.norm_squared();
        xg2 += d.dot(v.as_vec3());
        xg3 += v.as_vec3().norm_squared();
    }
    xg1 /= n;
    xg2 /= n;
    xg3 /= n;

    let mut x1 = 0.0;
    let mut x2 = 0.0;
    let mut x3 = 0.0;
    for (xi, vi) in s.x.iter().zip(s.v.iter()) {
        for (xk, vk) in s.x.iter().zip(s.v.iter()) {
            let dx = xi.as_vec3() - xk.as_vec3();
            let dv = vi.as_vec3() - vk.as_vec3();
            x1 += dx.norm_squared();
            x2 += dv.dot(dx);
            x3 += dv.norm_squared();
        }
    }
    let n2 = n * n;
    AuxVector6 {
        xg1,
        xg2,
        xg3,
        x1: x1 / n2,
        x2: x2 / n2,
        x3: x3 / n2,
    }
}

/// The observables together with their forcing vector, so that
/// `dX/dt = M X + F` holds exactly along structural trajectories driven by the
/// controls `A_i`.
pub fn aux_functionals(
    s: &StructuralState,
    params: &ModelParams,
    a_ctrl: &[Vec3],
) -> Result<(AuxVector6, AuxVector6), AnalysisError> {
    let sigma = params
        .sigma
        .constant()
        .ok_or(AnalysisError::RequiresConstantSigma)?;
    let n_agents = s.agent_count();
    if a_ctrl.len() != n_agents {
        return Err(AnalysisError::LengthMismatch);
    }
    let n = n_agents as f64;
    let c_q = params.c_q;
    let xg = s.x_gamma.as_vec3();
    let x: Vec<Vec3> = s.x.iter().map(|p| p.as_vec3()).collect();
    let v: Vec<Vec3> = s.v.iter().map(|t| t.as_vec3()).collect();

    // Target-relative forcing.
    let mut fg2 = 0.0;
    let mut fg3 = 0.0;
    for i in 0..n_agents {
        let d = x[i] - xg;
        let d2 = d.norm_squared();
        fg2 += -0.5 * v[i].norm_squared() * d2 + 0.25 * c_q * d2 * d2 + d.dot(a_ctrl[i]);
        let mut pair = 0.0;
        for xj in &x {
            pair += (x[i] - *xj).norm_squared();
        }
        fg2 += sigma / (4.0 * n) * pair * d2;
        fg3 += 2.0 * v[i].dot(a_ctrl[i]);
    }
    fg2 /= n;
    fg3 /= n;

    // Inter-agent forcing. The signs of the sigma and c_q pieces follow from
    // expanding <x_i, x_j> = 1 - ||x_i - x_j||^2 / 2 in the pairwise
    // difference equations; the finite-difference residual suite pins them.
    let mut f2 = 0.0;
    let mut f3 = 0.0;
    for i in 0..n_agents {
        let di = x[i] - xg;
        let di2 = di.norm_squared();
        let mut pair_i = 0.0;
        for xj in &x {
            pair_i += (x[i] - *xj).norm_squared();
        }
        for k in 0..n_agents {
            let dik = x[i] - x[k];
            let dik2 = dik.norm_squared();
            f2 += -0.5 * (v[i].norm_squared() + v[k].norm_squared()) * dik2
                + sigma / (2.0 * n) * pair_i * dik2
                + 0.5 * c_q * di2 * dik2
                + (a_ctrl[i] - a_ctrl[k]).dot(dik);
            f3 += 2.0
                * (v[i].norm_squared() * x[i].dot(v[k]) + v[k].norm_squared() * x[k].dot(v[i]))
                - 2.0 * sigma / n * pair_i * x[i].dot(v[k])
                - 2.0 * c_q * di2 * x[i].dot(v[k])
                + 2.0 * (a_ctrl[i] - a_ctrl[k]).dot(v[i] - v[k]);
        }
    }
    let n2 = n * n;
    let forcing = AuxVector6 {
        xg1: 0.0,
        xg2: fg2,
        xg3: fg3,
        x1: 0.0,
        x2: f2 / n2,
        x3: f3 / n2,
    };
    Ok((aux_state_vector(s), forcing))
}

/// A 6x6 coefficient matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix6 {
    pub m: [[f64; 6]; 6],
}

impl Matrix6 {
    pub fn mul_vec(&self, v: [f64; 6]) -> [f64; 6] {
        let mut out = [0.0; 6];
        for (o, row) in out.iter_mut().zip(self.m.iter()) {
            *o = row.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        }
        out
    }
}

/// Coefficient matrix of the six-dimensional linearized system.
///
/// The entry coupling `dXg3/dt` to `X2` is `-sigma`: the term arises as
/// `(2 sigma / N^2) sum <v_i, x_j> = -sigma X2`, and the finite-difference
/// residual suite pins the sign. The spectrum does not depend on this entry
/// (the matrix is block triangular).
pub fn matrix_m(params: &ModelParams) -> Result<Matrix6, AnalysisError> {
    let sigma = params
        .sigma
        .constant()
        .ok_or(AnalysisError::RequiresConstantSigma)?;
    let (c_q, c_p) = (params.c_q, params.c_p);
    Ok(Matrix6 {
        m: [
            [0.0, 2.0, 0.0, 0.0, 0.0, 0.0],
            [-c_q, -c_p, 1.0, -sigma / 2.0, 0.0, 0.0],
            [0.0, -2.0 * c_q, -2.0 * c_p, 0.0, -sigma, 0.0],
            [0.0, 0.0, 0.0, 0.0, 2.0, 0.0],
            [0.0, 0.0, 0.0, -(c_q + sigma), -c_p, 1.0],
            [0.0, 0.0, 0.0, 0.0, -2.0 * (c_q + sigma), -2.0 * c_p],
        ],
    })
}

/// Coefficient matrix of the per-agent weighted system (also the flat-space
/// deviation system).
pub fn matrix_minf(params: &ModelParams) -> Matrix3 {
    let (c_q, c_p) = (params.c_q, params.c_p);
    Matrix3::new([
        [0.0, 2.0, 0.0],
        [-c_q, -c_p, 1.0],
        [0.0, -2.0 * c_q, -2.0 * c_p],
    ])
}

/// Per-agent weighted observables `(X_i^1, X_i^2, X_i^3)`; the same shape
/// carries `F_i`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WeightedVector3 {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl WeightedVector3 {
    pub fn to_array(self) -> [f64; 3] {
        [self.x1, self.x2, self.x3]
    }

    pub fn norm(self) -> f64 {
        (self.x1 * self.x1 + self.x2 * self.x2 + self.x3 * self.x3).sqrt()
    }
}

fn weighted_denominator(s: &StructuralState, i: usize) -> Result<(Vec3, f64, f64), AnalysisError> {
    let x =
        s.x.get(i)
            .ok_or(AnalysisError::IndexOutOfRange { index: i })?
            .as_vec3();
    let d = x - s.x_gamma.as_vec3();
    let d2 = d.norm_squared();
    if d2 >= 4.0 - ANTIPODAL_TARGET_TOL {
        return Err(AnalysisError::AntipodalToTarget {
            agent: i,
            dist_sq: d2,
        });
    }
    Ok((d, d2, 4.0 - d2))
}

/// The weighted observable vector for agent `i`; defined while the agent stays
/// away from the target's antipode.
pub fn weighted_state_vector(
    s: &StructuralState,
    i: usize,
) -> Result<WeightedVector3, AnalysisError> {
    let (d, d2, u) = weighted_denominator(s, i)?;
    let v = s.v[i].as_vec3();
    Ok(WeightedVector3 {
        x1: 4.0 * d2 / u,
        x2: 16.0 * d.dot(v) / (u * u),
        x3: 16.0 * v.norm_squared() / (u * u),
    })
}

/// Weighted observables and forcing for agent `i`, so that
/// `dX_i/dt = M_inf X_i + F_i` along structural trajectories.
pub fn weighted_functionals(
    s: &StructuralState,
    params: &ModelParams,
    a_ctrl: &[Vec3],
    i: usize,
) -> Result<(WeightedVector3, WeightedVector3), AnalysisError> {
    let sigma = params
        .sigma
        .constant()
        .ok_or(AnalysisError::RequiresConstantSigma)?;
    if a_ctrl.len() != s.agent_count() {
        return Err(AnalysisError::LengthMismatch);
    }
    let (d, _, u) = weighted_denominator(s, i)?;
    let xi = s.x[i].as_vec3();
    let vi = s.v[i].as_vec3();
    let n = s.agent_count() as f64;
    let u2 = u * u;
    let u3 = u2 * u;
    let dv = d.dot(vi);

    let mut coop_x = 0.0;
    let mut coop_v = 0.0;
    for xj in &s.x {
        let xj = xj.as_vec3();
        coop_x += d.dot(xj - xi.dot(xj) * xi);
        coop_v += vi.dot(xj);
    }

    let f2 = -8.0 * vi.norm_squared() * d.norm_squared() / u2
        + 16.0 * sigma / (n * u2) * coop_x
        + 16.0 * d.dot(a_ctrl[i]) / u2
        + 64.0 * dv * dv / u3;
    let f3 = 32.0 * sigma / (n * u2) * coop_v
        + 32.0 * vi.dot(a_ctrl[i]) / u2
        + 64.0 * vi.norm_squared() * dv / u3;

    Ok((
        weighted_state_vector(s, i)?,
        WeightedVector3 {
            x1: 0.0,
            x2: f2,
            x3: f3,
        },
    ))
}

/// `max_i ||X_i||`, or infinity if some agent has reached the target's
/// antipode and the weighted functionals are undefined.
pub fn x_infinity(s: &StructuralState) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..s.agent_count() {
        match weighted_state_vector(s, i) {
            Ok(xi) => worst = worst.max(xi.norm()),
            Err(_) => return f64::INFINITY,
        }
    }
    worst
}

/// Closed-form spectra of `M` and `M_inf` plus the derived decay constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSummary {
    pub eig_m: [Complex64; 6],
    pub eig_minf: [Complex64; 3],
    /// `-max Re eig(M)`.
    pub mu: f64,
    /// `-max Re eig(M_inf)`.
    pub mu_inf: f64,
    /// The practical-rendezvous decay constant, a piecewise formula evaluated
    /// with a complex-safe square root. Its branch condition
    /// `c_p^2 >= -4 c_q` never fails for positive gains, so the real part of
    /// the principal root makes the formula total; the result then equals
    /// `mu_inf`. Consumers should report it next to `mu_inf` rather than
    /// treating the branch as informative.
    pub d_practical: f64,
}

/// Closed-form eigenvalues:
/// `eig(M) = { -c_p, -c_p, -c_p +- sqrt(c_p^2 - 4c_q), -c_p +- sqrt(c_p^2 - 4c_q - 4 sigma) }`,
/// `eig(M_inf) = { -c_p, -c_p +- sqrt(c_p^2 - 4c_q) }`.
pub fn spectrum(params: &ModelParams) -> Result<SpectralSummary, AnalysisError> {
    let sigma = params
        .sigma
        .constant()
        .ok_or(AnalysisError::RequiresConstantSigma)?;
    let (c_q, c_p) = (params.c_q, params.c_p);
    let root1 = Complex64::new(c_p * c_p - 4.0 * c_q, 0.0).sqrt();
    let root2 = Complex64::new(c_p * c_p - 4.0 * c_q - 4.0 * sigma, 0.0).sqrt();
    let base = Complex64::new(-c_p, 0.0);

    let eig_m = [
        base,
        base,
        base + root1,
        base - root1,
        base + root2,
        base - root2,
    ];
    let eig_minf = [base, base + root1, base - root1];

    let max_re = |eigs: &[Complex64]| eigs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    let d_practical = if c_p * c_p >= -4.0 * c_q {
        c_p - root1.re
    } else {
        c_p
    };

    Ok(SpectralSummary {
        eig_m,
        eig_minf,
        mu: -max_re(&eig_m),
        mu_inf: -max_re(&eig_minf),
        d_practical,
    })
}

/// Eigenvalues of a 3x3 real matrix by an independent numeric route (Schur
/// decomposition).
pub fn numeric_eigenvalues3(m: &Matrix3) -> [Complex64; 3] {
    let na = nalgebra::Matrix3::from_fn(|i, j| m.m[i][j]);
    let e = na.complex_eigenvalues();
    [e[0], e[1], e[2]]
}

/// Eigenvalues of a 6x6 real matrix by the same numeric route.
pub fn numeric_eigenvalues6(m: &Matrix6) -> [Complex64; 6] {
    let na = nalgebra::SMatrix::<f64, 6, 6>::from_fn(|i, j| m.m[i][j]);
    let e = na.complex_eigenvalues();
    [e[0], e[1], e[2], e[3], e[4], e[5]]
}

/// Worst-case distance under greedy nearest matching of two eigenvalue
/// multisets.
pub fn max_eigenvalue_mismatch(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut pool: Vec<Complex64> = b.to_vec();
    let mut worst: f64 = 0.0;
    for x in a {
        let (idx, dist) = pool
            .iter()
            .enumerate()
            .map(|(i, y)| (i, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("non-empty pool");
        pool.swap_remove(idx);
        worst = worst.max(dist);
    }
    worst
}

/// Tracking error at one recorded instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RendezvousSample {
    pub t: f64,
    /// `max_i ||q_i - q_g||`.
    pub d_max: f64,
    /// `max_i ||p_i - p_g||`.
    pub v_max: f64,
}

pub fn rendezvous_sample(state: &SystemState) -> RendezvousSample {
    let qg = state.target.position();
    let pg = state.target.velocity();
    let mut d_max: f64 = 0.0;
    let mut v_max: f64 = 0.0;
    for a in &state.agents {
        d_max = d_max.max((a.position() - qg).norm());
        v_max = v_max.max((a.velocity() - pg).norm());
    }
    RendezvousSample {
        t: state.t,
        d_max,
        v_max,
    }
}

/// Per-time maximum position and velocity tracking errors.
pub fn rendezvous_metrics(trajectory: &[SystemState]) -> Vec<RendezvousSample> {
    trajectory.iter().map(rendezvous_sample).collect()
}

/// Least-squares fit of `d(t) ~ amplitude * exp(rate * t)` over a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeFit {
    pub rate: f64,
    pub amplitude: f64,
}

/// Fits `ln d_max` linearly in `t` over `window`; needs at least two positive
/// samples inside the window.
pub fn fit_exponential_rate(
    samples: &[RendezvousSample],
    window: (f64, f64),
) -> Option<EnvelopeFit> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.t >= window.0 && s.t <= window.1 && s.d_max > 0.0)
        .map(|s| (s.t, s.d_max.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let st: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let stt: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sty: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * stt - st * st;
    if denom == 0.0 {
        return None;
    }
    let rate = (n * sty - st * sy) / denom;
    let intercept = (sy - rate * st) / n;
    Some(EnvelopeFit {
        rate,
        amplitude: intercept.exp(),
    })
}

/// Fits the coefficient `c` in `dE/dt = -c (1/N) sum ||v_i||^2` from sampled
/// `(t, E, E_k)` triples, using central differences in the interior. This is
/// how the dissipation constant is measured rather than assumed.
pub fn measured_dissipation(samples: &[(f64, f64, f64)]) -> Option<f64> {
    if samples.len() < 3 {
        return None;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for w in samples.windows(3) {
        let (t0, _, _) = w[0];
        let (_, _, ek1) = w[1];
        let (t2, _, _) = w[2];
        let de = (w[2].1 - w[0].1) / (t2 - t0);
        let rate = 2.0 * ek1; // (1/N) sum ||v_i||^2
        num += -de * rate;
        den += rate * rate;
    }
    if den == 0.0 {
        None
    } else {
        Some(num / den)
    }
}
