//! The Euclidean comparison model.
//!
//! In flat space the tracking system splits exactly into translational
//! dynamics for the center of mass and autonomous structural dynamics for the
//! deviations. With full target information the center-of-mass error obeys a
//! damped linear oscillator with the closed-form solution
//! [`qd_closed_form`]; with zero agent control the quadratic observables of
//! the error obey the inhomogeneous linear system of [`xd_system`], whose
//! decay constant bounds the limiting error by `10 C_g^2 / mu_d^2` for target
//! accelerations bounded by `C_g`.
//!
//! A periodic display box is supported for plotting; the interactions always
//! act on unwrapped coordinates, matching the model, so the wrap is purely a
//! presentation device.

use crate::dynamics::{ModelParams, TargetControl};
use crate::geom::{Matrix3, Vec3};
use crate::sim::{Rk4, SimError};

/// Positions and velocities of the agents and the target in ambient space.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatState {
    pub t: f64,
    pub q: Vec<Vec3>,
    pub p: Vec<Vec3>,
    pub q_gamma: Vec3,
    pub p_gamma: Vec3,
}

impl FlatState {
    pub fn agent_count(&self) -> usize {
        self.q.len()
    }
}

/// What the agents know about the target's acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlatControlMode {
    /// `u_i = u_g`: full information, complete rendezvous.
    MatchTarget,
    /// `u_i = 0`: practical rendezvous only.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatDerivatives {
    pub dq: Vec<Vec3>,
    pub dp: Vec<Vec3>,
    pub dq_gamma: Vec3,
    pub dp_gamma: Vec3,
}

/// Right-hand side of the flat tracking system:
/// `dp_i = sum_j (psi_ij/N)(p_j - p_i) + sum_j (sigma_ij/N)(q_j - q_i)
///        + c_q (q_g - q_i) + c_p (p_g - p_i) + u_i`.
pub fn flat_rhs(
    state: &FlatState,
    params: &ModelParams,
    u_gamma: Vec3,
    mode: FlatControlMode,
) -> FlatDerivatives {
    let n = state.agent_count();
    let mut dq = vec![Vec3::ZERO; n];
    let mut dp = vec![Vec3::ZERO; n];
    flat_rhs_raw(
        &state.q,
        &state.p,
        state.q_gamma,
        state.p_gamma,
        params,
        u_gamma,
        mode,
        &mut dq,
        &mut dp,
    );
    FlatDerivatives {
        dq,
        dp,
        dq_gamma: state.p_gamma,
        dp_gamma: u_gamma,
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn flat_rhs_raw(
    q: &[Vec3],
    p: &[Vec3],
    q_gamma: Vec3,
    p_gamma: Vec3,
    params: &ModelParams,
    u_gamma: Vec3,
    mode: FlatControlMode,
    dq_out: &mut [Vec3],
    dp_out: &mut [Vec3],
) {
    let n = q.len();
    let n_inv = 1.0 / n as f64;
    let u_i = match mode {
        FlatControlMode::MatchTarget => u_gamma,
        FlatControlMode::Zero => Vec3::ZERO,
    };
    for i in 0..n {
        let mut acc = Vec3::ZERO;
        for j in 0..n {
            let sigma_ij = params.sigma.at((q[i] - q[j]).norm_squared());
            acc += sigma_ij * (q[j] - q[i]);
            if params.psi > 0.0 {
                acc += params.psi * (p[j] - p[i]);
            }
        }
        acc = acc * n_inv;
        acc += params.c_q * (q_gamma - q[i]);
        acc += params.c_p * (p_gamma - p[i]);
        acc += u_i;
        dq_out[i] = p[i];
        dp_out[i] = acc;
    }
}

/// Closed-form solution of `d2q/dt2 = -c_q q - c_p dq/dt`, the center-of-mass
/// error under full target information.
///
/// Both roots of `r^2 + c_p r + c_q = 0` are used; when the discriminant
/// `c_p^2 - 4 c_q` is negative the complex pair is evaluated through its real
/// trigonometric form, and within [`REPEATED_ROOT_TOL`] of zero the confluent
/// limit with a `t exp(-c_p t / 2)` term takes over.
pub fn qd_closed_form(qd0: Vec3, pd0: Vec3, c_q: f64, c_p: f64, t: f64) -> Vec3 {
    let disc = c_p * c_p - 4.0 * c_q;
    let damp = (-0.5 * c_p * t).exp();
    let drift = qd0 * c_p + pd0 * 2.0;
    if disc.abs() < REPEATED_ROOT_TOL {
        return (qd0 + drift * (0.5 * t)) * damp;
    }
    if disc > 0.0 {
        let s = disc.sqrt();
        let arg = 0.5 * s * t;
        (qd0 * arg.cosh() + drift * (arg.sinh() / s)) * damp
    } else {
        let w = (-disc).sqrt();
        let arg = 0.5 * w * t;
        (qd0 * arg.cos() + drift * (arg.sin() / w)) * damp
    }
}

/// Discriminants smaller than this are treated as a repeated root.
pub const REPEATED_ROOT_TOL: f64 = 1e-12;

/// The linear system governing the quadratic error observables
/// `(||q_d||^2, <q_d, p_d>, ||p_d||^2)` in the zero-control case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XdSystem {
    pub m_d: Matrix3,
    /// `-max Re eig(M_d)`.
    pub mu_d: f64,
}

impl XdSystem {
    /// `limsup ||X_d|| <= 10 C_g^2 / mu_d^2` for `limsup ||u_g|| <= C_g`.
    pub fn bound(&self, c_gamma: f64) -> f64 {
        10.0 * c_gamma * c_gamma / (self.mu_d * self.mu_d)
    }
}

pub fn xd_system(c_q: f64, c_p: f64) -> XdSystem {
    assert!(c_q > 0.0 && c_p > 0.0, "gains must be positive");
    let m_d = Matrix3::new([
        [0.0, 2.0, 0.0],
        [-c_q, -c_p, 1.0],
        [0.0, -2.0 * c_q, -2.0 * c_p],
    ]);
    let disc = c_p * c_p - 4.0 * c_q;
    let mu_d = if disc > 0.0 { c_p - disc.sqrt() } else { c_p };
    XdSystem { m_d, mu_d }
}

/// Wraps a point into the periodic display box `[-w, w]^3`. Dynamics is never
/// computed on wrapped coordinates.
pub fn wrap_to_box(v: Vec3, half_width: f64) -> Vec3 {
    let width = 2.0 * half_width;
    let wrap = |x: f64| {
        let shifted = (x + half_width).rem_euclid(width);
        shifted - half_width
    };
    Vec3::new(wrap(v.x), wrap(v.y), wrap(v.z))
}

/// `max_i ||q_i - q_g||` on unwrapped coordinates.
pub fn flat_tracking_error(state: &FlatState) -> f64 {
    state
        .q
        .iter()
        .map(|q| (*q - state.q_gamma).norm())
        .fold(0.0, f64::max)
}

/// A flat-space scenario: coefficients, target control, knowledge mode and
/// the display box.
#[derive(Debug, Clone)]
pub struct FlatConfig {
    pub params: ModelParams,
    pub control: TargetControl,
    pub mode: FlatControlMode,
    pub box_half_width: f64,
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
}

/// Integrates the flat system with fixed-step RK4, sampling every
/// `record_every` steps.
pub fn run_flat(config: &FlatConfig, initial: &FlatState) -> Result<Vec<FlatState>, SimError> {
    let n = initial.agent_count();
    let dim = 6 + 6 * n;
    let mut y = vec![0.0; dim];
    pack(initial, &mut y);

    let steps = (config.t_end / config.dt).round() as usize;
    let mut rk4 = Rk4::new(dim);
    let mut samples = Vec::with_capacity(steps / config.record_every + 2);
    samples.push(initial.clone());

    let params = config.params.clone();
    let control = config.control.clone();
    let mode = config.mode;
    let mut q_buf = vec![Vec3::ZERO; n];
    let mut p_buf = vec![Vec3::ZERO; n];
    let mut dq_buf = vec![Vec3::ZERO; n];
    let mut dp_buf = vec![Vec3::ZERO; n];

    let mut t = initial.t;
    for step in 1..=steps {
        rk4.step(
            |tau, state, deriv| {
                let u = control.eval(tau);
                let qg = Vec3::new(state[0], state[1], state[2]);
                let pg = Vec3::new(state[3], state[4], state[5]);
                deriv[0] = pg.x;
                deriv[1] = pg.y;
                deriv[2] = pg.z;
                deriv[3] = u.x;
                deriv[4] = u.y;
                deriv[5] = u.z;
                for i in 0..n {
                    let base = 6 + 6 * i;
                    q_buf[i] = Vec3::new(state[base], state[base + 1], state[base + 2]);
                    p_buf[i] = Vec3::new(state[base + 3], state[base + 4], state[base + 5]);
                }
                flat_rhs_raw(
                    &q_buf,
                    &p_buf,
                    qg,
                    pg,
                    &params,
                    u,
                    mode,
                    &mut dq_buf,
                    &mut dp_buf,
                );
                for i in 0..n {
                    let base = 6 + 6 * i;
                    deriv[base] = dq_buf[i].x;
                    deriv[base + 1] = dq_buf[i].y;
                    deriv[base + 2] = dq_buf[i].z;
                    deriv[base + 3] = dp_buf[i].x;
                    deriv[base + 4] = dp_buf[i].y;
                    deriv[base + 5] = dp_buf[i].z;
                }
                Ok(())
            },
            t,
            &mut y,
            config.dt,
        )?;
        t = initial.t + step as f64 * config.dt;
        if step % config.record_every == 0 || step == steps {
            samples.push(unpack(t, &y, n));
        }
    }
    Ok(samples)
}

fn pack(state: &FlatState, y: &mut [f64]) {
    y[0..3].copy_from_slice(&state.q_gamma.to_array());
    y[3..6].copy_from_slice(&state.p_gamma.to_array());
    for i in 0..state.agent_count() {
        let base = 6 + 6 * i;
        y[base..base + 3].copy_from_slice(&state.q[i].to_array());
        y[base + 3..base + 6].copy_from_slice(&state.p[i].to_array());
    }
}

fn unpack(t: f64, y: &[f64], n: usize) -> FlatState {
    let q_gamma = Vec3::new(y[0], y[1], y[2]);
    let p_gamma = Vec3::new(y[3], y[4], y[5]);
    let mut q = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n);
    for i in 0..n {
        let base = 6 + 6 * i;
        q.push(Vec3::new(y[base], y[base + 1], y[base + 2]));
        p.push(Vec3::new(y[base + 3], y[base + 4], y[base + 5]));
    }
    FlatState {
        t,
        q,
        p,
        q_gamma,
        p_gamma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ControlMode;
    use crate::rng::SplitMix64;
    use crate::sim::rk4_step;

    fn params(sigma: f64, c_q: f64, c_p: f64) -> ModelParams {
        ModelParams::new(sigma, c_q, c_p, ControlMode::ZeroControl)
    }

    #[test]
    fn perfect_tracking_accelerates_with_target() {
        let state = FlatState {
            t: 0.0,
            q: vec![Vec3::EX; 3],
            p: vec![Vec3::EY; 3],
            q_gamma: Vec3::EX,
            p_gamma: Vec3::EY,
        };
        let u = Vec3::new(0.3, -0.1, 0.2);
        let d = flat_rhs(
            &state,
            &params(1.0, 2.0, 3.0),
            u,
            FlatControlMode::MatchTarget,
        );
        for dp in &d.dp {
            assert!((*dp - u).norm() < 1e-15);
        }
    }

    #[test]
    fn restoring_force_example() {
        let state = FlatState {
            t: 0.0,
            q: vec![Vec3::EX],
            p: vec![Vec3::ZERO],
            q_gamma: Vec3::ZERO,
            p_gamma: Vec3::ZERO,
        };
        let d = flat_rhs(
            &state,
            &params(0.0, 1.0, 0.0),
            Vec3::ZERO,
            FlatControlMode::Zero,
        );
        assert!((d.dp[0] + Vec3::EX).norm() < 1e-15);
    }

    #[test]
    fn center_of_mass_and_deviations_decouple() {
        let mut rng = SplitMix64::new(51);
        let n = 4;
        let state = FlatState {
            t: 0.0,
            q: (0..n).map(|_| rng.vec3_in_cube(2.0)).collect(),
            p: (0..n).map(|_| rng.vec3_in_cube(1.0)).collect(),
            q_gamma: rng.vec3_in_cube(2.0),
            p_gamma: rng.vec3_in_cube(1.0),
        };
        let prm = params(1.7, 2.5, 0.8);
        let u = rng.vec3_in_cube(1.0);
        let d = flat_rhs(&state, &prm, u, FlatControlMode::MatchTarget);

        let nf = n as f64;
        let q_c = state.q.iter().fold(Vec3::ZERO, |a, b| a + *b) / nf;
        let p_c = state.p.iter().fold(Vec3::ZERO, |a, b| a + *b) / nf;
        let dp_c = d.dp.iter().fold(Vec3::ZERO, |a, b| a + *b) / nf;

        // Translational part: dp_c = c_q (q_g - q_c) + c_p (p_g - p_c) + u.
        let expected = prm.c_q * (state.q_gamma - q_c) + prm.c_p * (state.p_gamma - p_c) + u;
        assert!((dp_c - expected).norm() < 1e-13);

        // Structural part: the deviation equations carry no target terms.
        for i in 0..n {
            let xi = state.q[i] - q_c;
            let vi = state.p[i] - p_c;
            let mut coop = Vec3::ZERO;
            for j in 0..n {
                coop += (state.q[j] - q_c - xi)
                    * prm.sigma.at((state.q[i] - state.q[j]).norm_squared());
            }
            let expected = coop / nf - prm.c_q * xi - prm.c_p * vi;
            let actual = d.dp[i] - dp_c;
            assert!((actual - expected).norm() < 1e-13);
        }
    }

    #[test]
    fn qd_closed_form_boundary_values() {
        assert_eq!(
            qd_closed_form(Vec3::ZERO, Vec3::ZERO, 5.0, 0.1, 3.7),
            Vec3::ZERO
        );
        let q0 = Vec3::new(0.3, -1.0, 0.2);
        let p0 = Vec3::new(0.1, 0.4, -0.2);
        assert_eq!(qd_closed_form(q0, p0, 5.0, 0.1, 0.0), q0);
    }

    /// RK4 oracle for the closed form, across the oscillatory, overdamped and
    /// repeated-root regimes.
    #[test]
    fn qd_closed_form_matches_rk4() {
        let q0 = Vec3::new(1.0, -0.5, 0.25);
        let p0 = Vec3::new(0.0, 0.3, -0.1);
        for (c_q, c_p) in [(5.0, 0.1), (1.0, 4.0), (4.0, 4.0)] {
            let mut y = vec![q0.x, q0.y, q0.z, p0.x, p0.y, p0.z];
            let dt = 1e-3;
            let steps = (10.0 / dt) as usize;
            for k in 0..steps {
                y = rk4_step(
                    |_, s, d| {
                        d[0] = s[3];
                        d[1] = s[4];
                        d[2] = s[5];
                        d[3] = -c_q * s[0] - c_p * s[3];
                        d[4] = -c_q * s[1] - c_p * s[4];
                        d[5] = -c_q * s[2] - c_p * s[5];
                        Ok(())
                    },
                    k as f64 * dt,
                    &y,
                    dt,
                )
                .unwrap();
            }
            let closed = qd_closed_form(q0, p0, c_q, c_p, 10.0);
            let integrated = Vec3::new(y[0], y[1], y[2]);
            let err = (closed - integrated).norm();
            assert!(err < 1e-6, "c_q={c_q}, c_p={c_p}: {err:.3e}");
        }
    }

    #[test]
    fn xd_system_figure_three_gains() {
        let sys = xd_system(4.0, 4.0);
        assert!((sys.mu_d - 4.0).abs() < 1e-15);
        assert!((sys.bound(1.0) - 0.625).abs() < 1e-15);
        // Same matrix as the weighted structural system.
        let minf = crate::analysis::matrix_minf(&params(1.0, 4.0, 4.0));
        assert!(sys.m_d.max_abs_diff(minf) < 1e-15);
    }

    #[test]
    fn tracked_center_decays_at_the_slow_rate() {
        // c_q = 3, c_p = 4: real roots -1 and -3, slow rate -1.
        let mut rng = SplitMix64::new(4);
        let n = 3;
        let initial = FlatState {
            t: 0.0,
            q: (0..n).map(|_| rng.vec3_in_cube(1.0)).collect(),
            p: (0..n).map(|_| rng.vec3_in_cube(1.0)).collect(),
            q_gamma: Vec3::new(2.0, 0.0, 0.0),
            p_gamma: Vec3::ZERO,
        };
        let config = FlatConfig {
            params: params(1.0, 3.0, 4.0),
            control: TargetControl::zero(),
            mode: FlatControlMode::MatchTarget,
            box_half_width: 5.0,
            dt: 1e-3,
            t_end: 10.0,
            record_every: 100,
        };
        let samples = run_flat(&config, &initial).unwrap();
        let pts: Vec<(f64, f64)> = samples
            .iter()
            .filter(|s| s.t >= 2.0 && s.t <= 8.0)
            .map(|s| {
                let nf = s.agent_count() as f64;
                let q_c = s.q.iter().fold(Vec3::ZERO, |a, b| a + *b) / nf;
                (s.t, (q_c - s.q_gamma).norm().ln())
            })
            .collect();
        let n_pts = pts.len() as f64;
        let st: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let stt: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sty: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let rate = (n_pts * sty - st * sy) / (n_pts * stt - st * st);
        assert!(
            (rate + 1.0).abs() < 0.2,
            "fitted decay rate {rate:.3} should be close to -1"
        );
    }

    #[test]
    fn deviations_ignore_the_target_trajectory() {
        let mut rng = SplitMix64::new(8);
        let n = 3;
        let initial = FlatState {
            t: 0.0,
            q: (0..n).map(|_| rng.vec3_in_cube(1.0)).collect(),
            p: (0..n).map(|_| rng.vec3_in_cube(1.0)).collect(),
            q_gamma: Vec3::new(1.0, 1.0, 0.0),
            p_gamma: Vec3::new(0.0, 0.5, 0.0),
        };
        let mk_config = |control: TargetControl| FlatConfig {
            params: params(1.0, 5.0, 0.1),
            control,
            mode: FlatControlMode::MatchTarget,
            box_half_width: 5.0,
            dt: 1e-3,
            t_end: 5.0,
            record_every: 500,
        };
        let a = run_flat(&mk_config(TargetControl::circular(0.5)), &initial).unwrap();
        let b = run_flat(
            &mk_config(TargetControl::new(|t| {
                Vec3::new((2.0 * t).sin(), 0.3, -t.cos())
            })),
            &initial,
        )
        .unwrap();
        for (sa, sb) in a.iter().zip(b.iter()) {
            let nf = n as f64;
            let qc_a = sa.q.iter().fold(Vec3::ZERO, |acc, v| acc + *v) / nf;
            let qc_b = sb.q.iter().fold(Vec3::ZERO, |acc, v| acc + *v) / nf;
            for i in 0..n {
                let xa = sa.q[i] - qc_a;
                let xb = sb.q[i] - qc_b;
                assert!((xa - xb).norm() < 1e-9, "t = {}", sa.t);
            }
        }
    }

    #[test]
    fn xd_bound_holds_in_simulation() {
        // Zero-control tracking of the circular target: after the transient,
        // ||X_d|| stays below 10 C^2 / mu_d^2 with C = a sqrt(2).
        let amplitude = 0.5;
        let initial = FlatState {
            t: 0.0,
            q: vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            p: vec![Vec3::ZERO, Vec3::ZERO],
            q_gamma: Vec3::ZERO,
            p_gamma: Vec3::ZERO,
        };
        let config = FlatConfig {
            params: params(1.0, 5.0, 2.0),
            control: TargetControl::circular(amplitude),
            mode: FlatControlMode::Zero,
            box_half_width: 5.0,
            dt: 1e-3,
            t_end: 60.0,
            record_every: 100,
        };
        let samples = run_flat(&config, &initial).unwrap();
        let sys = xd_system(5.0, 2.0);
        let c_gamma = amplitude * 2.0f64.sqrt();
        let bound = sys.bound(c_gamma);
        for s in samples.iter().filter(|s| s.t > 30.0) {
            let nf = s.agent_count() as f64;
            let q_c = s.q.iter().fold(Vec3::ZERO, |a, b| a + *b) / nf;
            let p_c = s.p.iter().fold(Vec3::ZERO, |a, b| a + *b) / nf;
            let qd = q_c - s.q_gamma;
            let pd = p_c - s.p_gamma;
            let x = [qd.norm_squared(), qd.dot(pd), pd.norm_squared()];
            let x_norm = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            assert!(
                x_norm <= bound,
                "||X_d|| = {x_norm:.4} exceeds bound {bound:.4} at t = {}",
                s.t
            );
        }
    }

    #[test]
    fn wrap_is_display_only() {
        let v = Vec3::new(6.0, -7.0, 2.0);
        let w = wrap_to_box(v, 5.0);
        assert!((w - Vec3::new(-4.0, 3.0, 2.0)).norm() < 1e-12);
        assert!(w.x.abs() <= 5.0 && w.y.abs() <= 5.0 && w.z.abs() <= 5.0);
    }
}
