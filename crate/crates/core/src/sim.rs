//! Fixed-step RK4 time stepping, trajectory generation and parameter sweeps.
//!
//! A simulation advances the target and all agents in one RK4 vector so every
//! stage sees a consistent state. Constraint drift (how far agents leave the
//! sphere and their tangent planes) is monitored at every step and recorded
//! in the diagnostics; it is not corrected unless `renormalize` is on, so the
//! conservation built into the dynamics is genuinely observable.

use std::time::Instant;

use thiserror::Error;

use crate::analysis::{self, AnalysisError, AuxVector6};
use crate::dynamics::{
    main_rhs_raw, target_rhs_raw, AgentPhase, ControlMode, DynamicsError, ModelParams, SystemState,
    TargetControl, TargetPhase,
};
use crate::frame::{self, FrameError};
use crate::geom::{cross, GeomError, Matrix3, SpherePoint, TangentVector, Vec3};
use crate::rng::SplitMix64;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_RECORD_EVERY: usize = 100;
pub const DEFAULT_TARGET_AMPLITUDE: f64 = 0.5;

/// Norm drift beyond this aborts a run: the agents have escaped the sphere.
pub const CONSTRAINT_BLOWUP_TOL: f64 = 1e-2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("constraint blow-up at t = {t}: max | ||q_i|| - 1 | = {drift:.3e}")]
    ConstraintBlowup { t: f64, drift: f64 },
    #[error("initial data is not admissible: {detail}")]
    InadmissibleInitial { detail: String },
    #[error("unknown sweep parameter `{name}`")]
    UnknownParameter { name: String },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

impl From<GeomError> for SimError {
    fn from(e: GeomError) -> Self {
        SimError::Dynamics(DynamicsError::Geom(e))
    }
}

/// Classical fixed-step RK4 with reusable stage buffers.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `y` in place from `t` to `t + dt`.
    pub fn step<F>(&mut self, mut rhs: F, t: f64, y: &mut [f64], dt: f64) -> Result<(), SimError>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), SimError>,
    {
        let dim = y.len();
        rhs(t, y, &mut self.k1)?;
        for i in 0..dim {
            self.tmp[i] = y[i] + 0.5 * dt * self.k1[i];
        }
        rhs(t + 0.5 * dt, &self.tmp, &mut self.k2)?;
        for i in 0..dim {
            self.tmp[i] = y[i] + 0.5 * dt * self.k2[i];
        }
        rhs(t + 0.5 * dt, &self.tmp, &mut self.k3)?;
        for i in 0..dim {
            self.tmp[i] = y[i] + dt * self.k3[i];
        }
        rhs(t + dt, &self.tmp, &mut self.k4)?;
        for i in 0..dim {
            y[i] += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
            if !y[i].is_finite() {
                return Err(SimError::NonFiniteState { t: t + dt });
            }
        }
        Ok(())
    }
}

/// One RK4 step on a freshly allocated copy of `state`.
pub fn rk4_step<F>(rhs: F, t: f64, state: &[f64], dt: f64) -> Result<Vec<f64>, SimError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), SimError>,
{
    assert!(dt > 0.0, "dt must be positive");
    let mut y = state.to_vec();
    Rk4::new(state.len()).step(rhs, t, &mut y, dt)?;
    Ok(y)
}

/// Exact free motion on the sphere (`u_g = 0`):
/// `q(t) = cos(wt) q0 + sin(wt) p0 / w` with `w = ||p0||`. The reference
/// solution used to pin the integrator's accuracy and order.
pub fn geodesic_closed_form(q0: Vec3, p0: Vec3, t: f64) -> (Vec3, Vec3) {
    let w = p0.norm();
    if w == 0.0 {
        return (q0, p0);
    }
    let (s, c) = (w * t).sin_cos();
    (q0 * c + p0 * (s / w), p0 * c - q0 * (s * w))
}

/// Which initial data a simulation starts from.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// One of the bundled six-agent reference datasets, normalized and
    /// tangent-projected onto the admissible manifold (the recorded values are
    /// four-decimal roundings).
    Reference(ReferenceData),
    /// Seeded random data: positions uniform on the sphere, velocities drawn
    /// in `[-1, 1]^3` and tangent-projected.
    Random { count: usize },
    /// Caller-provided phases, validated strictly.
    Explicit {
        agents: Vec<(Vec3, Vec3)>,
        target: (Vec3, Vec3),
    },
}

/// The two bundled initial datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceData {
    /// Agents spread over the sphere (the complete-rendezvous experiments).
    Spread,
    /// Agents starting near the target (the practical-rendezvous experiments).
    NearTarget,
}

/// Full description of one simulation run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub params: ModelParams,
    pub control: TargetControl,
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub renormalize: bool,
    pub seed: u64,
    pub initial: InitialData,
}

impl SimConfig {
    pub fn new(params: ModelParams, initial: InitialData) -> Self {
        SimConfig {
            params,
            control: TargetControl::circular(DEFAULT_TARGET_AMPLITUDE),
            dt: DEFAULT_DT,
            t_end: 200.0,
            record_every: DEFAULT_RECORD_EVERY,
            renormalize: false,
            seed: 0,
            initial,
        }
    }
}

/// Per-sample functional values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub d_max: f64,
    pub v_max: f64,
    pub e_k: f64,
    /// NaN when the inter-agent gain is not constant (the configuration
    /// energy is undefined then).
    pub e_c: f64,
    /// `max_i | ||q_i|| - 1 |`.
    pub norm_drift: f64,
    /// `max_i |<q_i, p_i>|`.
    pub orth_drift: f64,
    pub x6: AuxVector6,
    /// `max_i ||X_i||`; infinite if some agent sits at the target's antipode.
    pub x_inf: f64,
}

/// A recorded trajectory with its diagnostics and any hypothesis warnings.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub samples: Vec<(SystemState, DiagnosticsRecord)>,
    pub warnings: Vec<String>,
    pub wall_time_s: f64,
}

impl SimRun {
    pub fn states(&self) -> Vec<SystemState> {
        self.samples.iter().map(|(s, _)| s.clone()).collect()
    }

    pub fn final_state(&self) -> &SystemState {
        &self.samples.last().expect("at least the initial sample").0
    }

    pub fn final_diagnostics(&self) -> &DiagnosticsRecord {
        &self.samples.last().expect("at least the initial sample").1
    }
}

pub fn initial_state(initial: &InitialData, seed: u64) -> Result<SystemState, SimError> {
    match initial {
        InitialData::Reference(dataset) => {
            let (q, p, tq, tp) = scenarios::reference_dataset(*dataset);
            let agents = q
                .iter()
                .zip(p.iter())
                .map(|(&qi, &pi)| AgentPhase::project(Vec3::from_array(qi), Vec3::from_array(pi)))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| SimError::InadmissibleInitial {
                    detail: e.to_string(),
                })?;
            let target =
                TargetPhase::project(Vec3::from_array(tq), Vec3::from_array(tp)).map_err(|e| {
                    SimError::InadmissibleInitial {
                        detail: e.to_string(),
                    }
                })?;
            Ok(SystemState::new(0.0, agents, target)?)
        }
        InitialData::Random { count } => {
            if *count == 0 {
                return Err(SimError::InadmissibleInitial {
                    detail: "random initial data needs at least one agent".into(),
                });
            }
            let mut rng = SplitMix64::new(seed);
            let draw = |rng: &mut SplitMix64| -> Result<AgentPhase, SimError> {
                let q = rng.unit_vector();
                let p = rng.vec3_in_cube(1.0);
                AgentPhase::project(q, p).map_err(|e| SimError::InadmissibleInitial {
                    detail: e.to_string(),
                })
            };
            let target = draw(&mut rng)?;
            let agents = (0..*count)
                .map(|_| draw(&mut rng))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(SystemState::new(0.0, agents, target)?)
        }
        InitialData::Explicit { agents, target } => {
            let built = agents
                .iter()
                .map(|&(q, p)| {
                    let point = SpherePoint::try_new(q)?;
                    let tangent = TangentVector::try_new(point, p)?;
                    Ok(AgentPhase::new(point, tangent).expect("matching base"))
                })
                .collect::<Result<Vec<_>, GeomError>>()
                .map_err(|e| SimError::InadmissibleInitial {
                    detail: e.to_string(),
                })?;
            let tq = SpherePoint::try_new(target.0).map_err(|e| SimError::InadmissibleInitial {
                detail: e.to_string(),
            })?;
            let tp = TangentVector::try_new(tq, target.1).map_err(|e| {
                SimError::InadmissibleInitial {
                    detail: e.to_string(),
                }
            })?;
            Ok(SystemState::new(
                0.0,
                built,
                TargetPhase::new(tq, tp).expect("matching base"),
            )?)
        }
    }
}

fn hypothesis_warnings(state: &SystemState, params: &ModelParams) -> Vec<String> {
    let mut warnings = Vec::new();
    if params.control_mode == ControlMode::ZeroControl {
        for (i, a) in state.agents.iter().enumerate() {
            let gap = ((a.velocity() - state.target.velocity()).norm() - 2.0).abs();
            if gap < 1e-6 {
                warnings.push(format!(
                    "agent {}: ||p_i(0) - p_g(0)|| = 2 within {gap:.1e}; the practical-rendezvous \
                     hypothesis excludes this configuration",
                    i + 1
                ));
            }
        }
    }
    warnings
}

fn vec3_at(y: &[f64], base: usize) -> Vec3 {
    Vec3::new(y[base], y[base + 1], y[base + 2])
}

fn set_vec3(y: &mut [f64], base: usize, v: Vec3) {
    y[base] = v.x;
    y[base + 1] = v.y;
    y[base + 2] = v.z;
}

fn pack_state(state: &SystemState, y: &mut [f64]) {
    set_vec3(y, 0, state.target.position());
    set_vec3(y, 3, state.target.velocity());
    for (i, a) in state.agents.iter().enumerate() {
        set_vec3(y, 6 + 6 * i, a.position());
        set_vec3(y, 9 + 6 * i, a.velocity());
    }
}

fn unpack_state(t: f64, y: &[f64], n: usize) -> Result<SystemState, SimError> {
    let tol = CONSTRAINT_BLOWUP_TOL;
    let tq = SpherePoint::try_new_with_tol(vec3_at(y, 0), tol)?;
    let tp = TangentVector::try_new_with_tol(tq, vec3_at(y, 3), tol)?;
    let target = TargetPhase::new(tq, tp).expect("matching base");
    let mut agents = Vec::with_capacity(n);
    for i in 0..n {
        let q = SpherePoint::try_new_with_tol(vec3_at(y, 6 + 6 * i), tol)?;
        let p = TangentVector::try_new_with_tol(q, vec3_at(y, 9 + 6 * i), tol)?;
        agents.push(AgentPhase::new(q, p).expect("matching base"));
    }
    Ok(SystemState::new(t, agents, target)?)
}

fn agent_drifts(y: &[f64], n: usize) -> (f64, f64) {
    let mut norm_drift: f64 = 0.0;
    let mut orth_drift: f64 = 0.0;
    for i in 0..n {
        let q = vec3_at(y, 6 + 6 * i);
        let p = vec3_at(y, 9 + 6 * i);
        norm_drift = norm_drift.max((q.norm() - 1.0).abs());
        orth_drift = orth_drift.max(q.dot(p).abs());
    }
    (norm_drift, orth_drift)
}

fn diagnostics_for(
    state: &SystemState,
    params: &ModelParams,
    y: &[f64],
) -> Result<DiagnosticsRecord, SimError> {
    let n = state.agents.len();
    let sample = analysis::rendezvous_sample(state);
    let snapshot = frame::structural_snapshot(state)?;
    let (e_k, e_c) = match analysis::energy(&snapshot, params) {
        Ok(e) => (e.e_k, e.e_c),
        Err(AnalysisError::RequiresConstantSigma) => {
            let kinetic = snapshot
                .v
                .iter()
                .map(|v| v.as_vec3().norm_squared())
                .sum::<f64>()
                / (2.0 * n as f64);
            (kinetic, f64::NAN)
        }
        Err(e) => return Err(e.into()),
    };
    let (norm_drift, orth_drift) = agent_drifts(y, n);
    Ok(DiagnosticsRecord {
        t: state.t,
        d_max: sample.d_max,
        v_max: sample.v_max,
        e_k,
        e_c,
        norm_drift,
        orth_drift,
        x6: analysis::aux_state_vector(&snapshot),
        x_inf: analysis::x_infinity(&snapshot),
    })
}

/// Integrates the multi-agent system and records states plus diagnostics every
/// `record_every` steps (the initial and final instants are always included).
pub fn run_simulation(config: &SimConfig) -> Result<SimRun, SimError> {
    let start = Instant::now();
    let state0 = initial_state(&config.initial, config.seed)?;
    let warnings = hypothesis_warnings(&state0, &config.params);
    let n = state0.agents.len();
    let dim = 6 + 6 * n;

    let mut y = vec![0.0; dim];
    pack_state(&state0, &mut y);

    assert!(
        config.dt > 0.0 && config.t_end > 0.0,
        "dt and t_end must be positive"
    );
    assert!(config.record_every >= 1, "record_every must be at least 1");
    let steps = (config.t_end / config.dt).round() as usize;

    let mut samples = Vec::with_capacity(steps / config.record_every + 2);
    samples.push((
        state0.clone(),
        diagnostics_for(&state0, &config.params, &y)?,
    ));

    let params = config.params.clone();
    let control = config.control.clone();
    let mut q_buf = vec![Vec3::ZERO; n];
    let mut p_buf = vec![Vec3::ZERO; n];
    let mut dq_buf = vec![Vec3::ZERO; n];
    let mut dp_buf = vec![Vec3::ZERO; n];

    let mut rk4 = Rk4::new(dim);
    for step in 1..=steps {
        let t = (step - 1) as f64 * config.dt;
        rk4.step(
            |tau, s, d| {
                let qg = vec3_at(s, 0);
                let pg = vec3_at(s, 3);
                let (dqg, dpg) = target_rhs_raw(qg, pg, control.eval(tau));
                set_vec3(d, 0, dqg);
                set_vec3(d, 3, dpg);
                for i in 0..n {
                    q_buf[i] = vec3_at(s, 6 + 6 * i);
                    p_buf[i] = vec3_at(s, 9 + 6 * i);
                }
                main_rhs_raw(
                    &q_buf,
                    &p_buf,
                    qg,
                    pg,
                    &params,
                    control.eval(tau),
                    &mut dq_buf,
                    &mut dp_buf,
                )?;
                for i in 0..n {
                    set_vec3(d, 6 + 6 * i, dq_buf[i]);
                    set_vec3(d, 9 + 6 * i, dp_buf[i]);
                }
                Ok(())
            },
            t,
            &mut y,
            config.dt,
        )?;
        let t_now = step as f64 * config.dt;

        if config.renormalize {
            for i in 0..n {
                let q = vec3_at(&y, 6 + 6 * i);
                let p = vec3_at(&y, 9 + 6 * i);
                let q = q / q.norm();
                set_vec3(&mut y, 6 + 6 * i, q);
                set_vec3(&mut y, 9 + 6 * i, p - p.dot(q) * q);
            }
        }

        let (norm_drift, _) = agent_drifts(&y, n);
        if norm_drift > CONSTRAINT_BLOWUP_TOL {
            return Err(SimError::ConstraintBlowup {
                t: t_now,
                drift: norm_drift,
            });
        }

        if step % config.record_every == 0 || step == steps {
            let state = unpack_state(t_now, &y, n)?;
            let diag = diagnostics_for(&state, &config.params, &y)?;
            samples.push((state, diag));
        }
    }

    Ok(SimRun {
        samples,
        warnings,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// One sweep result: the swept value, the tracking-error envelope at the probe
/// time (see [`run_sweep`]), and the error at the end of the run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub d_probe: f64,
    pub d_final: f64,
}

/// Applies a named scalar override to a configuration. Supported names:
/// `sigma`, `c_q`, `c_p`, `psi`, `k0`, `dt`, `t_end`, `a` (target-control
/// amplitude).
pub fn apply_parameter(config: &mut SimConfig, name: &str, value: f64) -> Result<(), SimError> {
    match name {
        "sigma" => config.params.sigma = crate::dynamics::SigmaModel::Constant(value),
        "c_q" => config.params.c_q = value,
        "c_p" => config.params.c_p = value,
        "psi" => config.params.psi = value,
        "k0" => config.params.k0 = value,
        "dt" => config.dt = value,
        "t_end" => config.t_end = value,
        "a" | "target_amplitude" => config.control = TargetControl::circular(value),
        _ => {
            return Err(SimError::UnknownParameter {
                name: name.to_string(),
            })
        }
    }
    Ok(())
}

/// Runs one independent simulation per value of the swept parameter,
/// concurrently, and reports the tracking error at the probe time. Rows come
/// back in input order.
///
/// In the zero-control regime the steady tracking error oscillates with the
/// driving period of the target control, so an instantaneous sample aliases
/// the oscillation phase. `d_probe` therefore reports the envelope: the
/// maximum of `d_max` over one driving period (`2 pi`) centered on the probe
/// time.
pub fn run_sweep(
    base: &SimConfig,
    parameter: &str,
    values: &[f64],
    probe_time: f64,
) -> Result<Vec<SweepRow>, SimError> {
    assert!(!values.is_empty(), "sweep needs at least one value");
    // Validate the name once up front so a typo fails before spawning work.
    apply_parameter(&mut base.clone(), parameter, values[0])?;

    let results: Vec<Result<SweepRow, SimError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = values
            .iter()
            .map(|&value| {
                let mut config = base.clone();
                let parameter = parameter.to_string();
                scope.spawn(move || -> Result<SweepRow, SimError> {
                    apply_parameter(&mut config, &parameter, value)?;
                    let run = run_simulation(&config)?;
                    let half_period = std::f64::consts::PI;
                    let windowed = run
                        .samples
                        .iter()
                        .filter(|(_, d)| (d.t - probe_time).abs() <= half_period)
                        .map(|(_, d)| d.d_max)
                        .fold(f64::NAN, f64::max);
                    let d_probe = if windowed.is_nan() {
                        // Probe outside the simulated horizon: nearest sample.
                        run.samples
                            .iter()
                            .min_by(|a, b| {
                                (a.1.t - probe_time)
                                    .abs()
                                    .total_cmp(&(b.1.t - probe_time).abs())
                            })
                            .expect("non-empty run")
                            .1
                            .d_max
                    } else {
                        windowed
                    };
                    Ok(SweepRow {
                        value,
                        d_probe,
                        d_final: run.final_diagnostics().d_max,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep thread panicked"))
            .collect()
    });
    results.into_iter().collect()
}

/// One sample of the dual-integration comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionSample {
    pub t: f64,
    /// `max_i ||q_i - S x_i||` between the ambient route and the
    /// frame-composed structural route.
    pub position_gap: f64,
    /// `||S^T q_g - q_g(0)||`: how far the anchor drifts from constancy.
    pub anchor_drift: f64,
}

#[derive(Debug, Clone)]
pub struct DecompositionReport {
    pub samples: Vec<DecompositionSample>,
    pub max_position_gap: f64,
    pub max_anchor_drift: f64,
}

/// Integrates the ambient system and, independently, the structural system
/// composed with the frame, inside one RK4 vector (same stages, same order of
/// accuracy), and compares the two routes.
///
/// The structural route never reads the ambient agent block: it reconstructs
/// its own ambient image from `(S, x_i, v_i)` and the target, so the
/// comparison is a genuine equivalence check.
pub fn run_decomposition(config: &SimConfig) -> Result<DecompositionReport, SimError> {
    let state0 = initial_state(&config.initial, config.seed)?;
    let n = state0.agents.len();
    // Layout: target (6) | ambient agents (6n) | frame S row-major (9) |
    // structural x, v (6n).
    let ambient_base = 6;
    let frame_base = 6 + 6 * n;
    let structural_base = frame_base + 9;
    let dim = structural_base + 6 * n;

    let mut y = vec![0.0; dim];
    pack_state(&state0, &mut y);
    for i in 0..3 {
        y[frame_base + 4 * i] = 1.0; // S = I
    }
    let q_gamma0 = state0.target.position();
    let w0 = cross(q_gamma0, state0.target.velocity());
    for (i, a) in state0.agents.iter().enumerate() {
        set_vec3(&mut y, structural_base + 6 * i, a.position());
        set_vec3(
            &mut y,
            structural_base + 6 * i + 3,
            a.velocity() - cross(w0, a.position()),
        );
    }

    let params = config.params.clone();
    let control = config.control.clone();
    let steps = (config.t_end / config.dt).round() as usize;
    let mut rk4 = Rk4::new(dim);

    let mut q_buf = vec![Vec3::ZERO; n];
    let mut p_buf = vec![Vec3::ZERO; n];
    let mut dq_buf = vec![Vec3::ZERO; n];
    let mut dp_buf = vec![Vec3::ZERO; n];
    let mut x_buf = vec![Vec3::ZERO; n];
    let mut v_buf = vec![Vec3::ZERO; n];
    let mut a_buf = vec![Vec3::ZERO; n];
    let mut dx_buf = vec![Vec3::ZERO; n];
    let mut dv_buf = vec![Vec3::ZERO; n];

    let read_frame = |s: &[f64]| -> Matrix3 {
        Matrix3::new([
            [s[frame_base], s[frame_base + 1], s[frame_base + 2]],
            [s[frame_base + 3], s[frame_base + 4], s[frame_base + 5]],
            [s[frame_base + 6], s[frame_base + 7], s[frame_base + 8]],
        ])
    };
    let record = |t: f64, y: &[f64]| -> DecompositionSample {
        let s_mat = read_frame(y);
        let mut gap: f64 = 0.0;
        for i in 0..n {
            let q_ambient = vec3_at(y, ambient_base + 6 * i);
            let x = vec3_at(y, structural_base + 6 * i);
            gap = gap.max((q_ambient - s_mat.mul_vec(x)).norm());
        }
        let anchor = s_mat.transpose().mul_vec(vec3_at(y, 0));
        DecompositionSample {
            t,
            position_gap: gap,
            anchor_drift: (anchor - q_gamma0).norm(),
        }
    };

    let mut samples = Vec::with_capacity(steps / config.record_every + 2);
    samples.push(record(0.0, &y));

    for step in 1..=steps {
        let t = (step - 1) as f64 * config.dt;
        rk4.step(
            |tau, s, d| {
                let qg = vec3_at(s, 0);
                let pg = vec3_at(s, 3);
                let u = control.eval(tau);
                let (dqg, dpg) = target_rhs_raw(qg, pg, u);
                set_vec3(d, 0, dqg);
                set_vec3(d, 3, dpg);

                // Ambient route.
                for i in 0..n {
                    q_buf[i] = vec3_at(s, ambient_base + 6 * i);
                    p_buf[i] = vec3_at(s, ambient_base + 6 * i + 3);
                }
                main_rhs_raw(&q_buf, &p_buf, qg, pg, &params, u, &mut dq_buf, &mut dp_buf)?;
                for i in 0..n {
                    set_vec3(d, ambient_base + 6 * i, dq_buf[i]);
                    set_vec3(d, ambient_base + 6 * i + 3, dp_buf[i]);
                }

                // Frame: dS/dt = skew(w) S.
                let (w, dw) = crate::dynamics::angular_state_raw(qg, pg, u);
                let s_mat = read_frame(s);
                let ds = crate::geom::skew(w).mul_mat(s_mat);
                for r in 0..3 {
                    for c in 0..3 {
                        d[frame_base + 3 * r + c] = ds.m[r][c];
                    }
                }

                // Structural route, self-contained in (S, x, v).
                for i in 0..n {
                    x_buf[i] = vec3_at(s, structural_base + 6 * i);
                    v_buf[i] = vec3_at(s, structural_base + 6 * i + 3);
                }
                match params.control_mode {
                    ControlMode::FullInfo => a_buf.fill(Vec3::ZERO),
                    ControlMode::ZeroControl => {
                        let st = s_mat.transpose();
                        for i in 0..n {
                            let q_i = s_mat.mul_vec(x_buf[i]);
                            let p_i = cross(w, q_i) + s_mat.mul_vec(v_buf[i]);
                            let ambient = crate::dynamics::extra_control_u1_raw(q_i, p_i, w, dw);
                            a_buf[i] = -1.0 * st.mul_vec(ambient);
                        }
                    }
                }
                frame::structural_rhs_raw(
                    &x_buf,
                    &v_buf,
                    q_gamma0,
                    &params,
                    &a_buf,
                    &mut dx_buf,
                    &mut dv_buf,
                );
                for i in 0..n {
                    set_vec3(d, structural_base + 6 * i, dx_buf[i]);
                    set_vec3(d, structural_base + 6 * i + 3, dv_buf[i]);
                }
                Ok(())
            },
            t,
            &mut y,
            config.dt,
        )?;

        // Polar correction of the frame block after the step.
        let corrected = frame::reorthonormalize(read_frame(&y));
        for r in 0..3 {
            for c in 0..3 {
                y[frame_base + 3 * r + c] = corrected.m[r][c];
            }
        }

        if step % config.record_every == 0 || step == steps {
            samples.push(record(step as f64 * config.dt, &y));
        }
    }

    let max_position_gap = samples.iter().map(|s| s.position_gap).fold(0.0, f64::max);
    let max_anchor_drift = samples.iter().map(|s| s.anchor_drift).fold(0.0, f64::max);
    Ok(DecompositionReport {
        samples,
        max_position_gap,
        max_anchor_drift,
    })
}

/// The bundled experiment configurations, one per reported figure.
pub mod scenarios {
    use super::*;

    pub const FIGURE1_AGENT_Q: [[f64; 3]; 6] = [
        [0.8132, 0.4989, -0.2993],
        [0.7198, 0.4908, 0.4908],
        [-0.6758, -0.6991, 0.2330],
        [-0.7878, 0.5627, -0.2501],
        [-0.5440, -0.7504, 0.3752],
        [-0.8599, -0.3608, 0.3608],
    ];
    pub const FIGURE1_AGENT_P: [[f64; 3]; 6] = [
        [0.1028, -0.1884, -0.0347],
        [-0.1168, 0.5118, -0.3405],
        [-0.0821, 0.0857, 0.0191],
        [-0.1454, -0.1506, 0.1189],
        [0.2220, -0.1040, 0.1137],
        [-0.0003, 0.3768, 0.3759],
    ];
    pub const FIGURE1_TARGET_Q: [f64; 3] = [-0.6451, 0.6605, -0.3840];
    pub const FIGURE1_TARGET_P: [f64; 3] = [0.1761, 0.3646, 0.3311];

    pub const FIGURE3_AGENT_Q: [[f64; 3]; 6] = [
        [-0.8147, -0.5366, 0.2193],
        [-0.4575, -0.8843, 0.0922],
        [-0.4335, -0.8173, 0.3794],
        [-0.8645, -0.2373, 0.4429],
        [-0.4420, -0.7998, 0.4060],
        [-0.4312, -0.6004, 0.6734],
    ];
    pub const FIGURE3_AGENT_P: [[f64; 3]; 6] = [
        [0.0228, -0.0750, -0.0987],
        [0.2519, -0.1263, 0.0383],
        [0.0200, 0.0169, 0.0594],
        [0.0388, -0.1447, -0.0017],
        [0.0365, 0.1109, 0.2583],
        [0.0081, 0.0050, 0.0097],
    ];
    pub const FIGURE3_TARGET_Q: [f64; 3] = [-0.6324, -0.6324, 0.4472];
    pub const FIGURE3_TARGET_P: [f64; 3] = [0.4712, -0.1742, 0.4199];

    /// Agent positions, agent velocities, target position, target velocity.
    pub(super) type Dataset = ([[f64; 3]; 6], [[f64; 3]; 6], [f64; 3], [f64; 3]);

    pub(super) fn reference_dataset(dataset: ReferenceData) -> Dataset {
        match dataset {
            ReferenceData::Spread => (
                FIGURE1_AGENT_Q,
                FIGURE1_AGENT_P,
                FIGURE1_TARGET_Q,
                FIGURE1_TARGET_P,
            ),
            ReferenceData::NearTarget => (
                FIGURE3_AGENT_Q,
                FIGURE3_AGENT_P,
                FIGURE3_TARGET_Q,
                FIGURE3_TARGET_P,
            ),
        }
    }

    /// Complete rendezvous: `sigma = 1, c_q = 5, c_p = 0.1, a = 0.5`,
    /// full-information control, spread initial agents.
    pub fn figure1() -> SimConfig {
        SimConfig::new(
            ModelParams::new(1.0, 5.0, 0.1, ControlMode::FullInfo),
            InitialData::Reference(ReferenceData::Spread),
        )
    }

    /// Practical rendezvous: `sigma = 1, c_q = 4, c_p = 4, a = 0.5`, zero
    /// control, agents near the target.
    pub fn figure3() -> SimConfig {
        SimConfig::new(
            ModelParams::new(1.0, 4.0, 4.0, ControlMode::ZeroControl),
            InitialData::Reference(ReferenceData::NearTarget),
        )
    }

    /// The rotational-flocking variant of [`figure1`] (`psi = 1`).
    pub fn figure5() -> SimConfig {
        let mut config = figure1();
        config.params = config.params.with_psi(1.0);
        config
    }

    /// The failure mode: no velocity alignment (`c_p = 0`) with the radial
    /// feedback `k0 = 1e4` keeping agents on the sphere.
    pub fn figure9() -> SimConfig {
        let mut config = figure1();
        config.params.c_p = 0.0;
        config.params = config.params.with_k0(1e4);
        config
    }

    /// Velocity-alignment gains swept in the practical-rendezvous scenario.
    pub fn figure4b_values() -> Vec<f64> {
        vec![1.0, 2.0, 4.0, 8.0, 16.0]
    }

    /// Flat-space complete rendezvous (`u_i = u_g`), reusing the spread
    /// dataset as Euclidean initial data inside the periodic display box.
    pub fn figure7() -> (crate::flatspace::FlatConfig, crate::flatspace::FlatState) {
        flat_scenario(crate::flatspace::FlatControlMode::MatchTarget)
    }

    /// Flat-space practical rendezvous (`u_i = 0`).
    pub fn figure8() -> (crate::flatspace::FlatConfig, crate::flatspace::FlatState) {
        flat_scenario(crate::flatspace::FlatControlMode::Zero)
    }

    fn flat_scenario(
        mode: crate::flatspace::FlatControlMode,
    ) -> (crate::flatspace::FlatConfig, crate::flatspace::FlatState) {
        let config = crate::flatspace::FlatConfig {
            params: ModelParams::new(1.0, 5.0, 0.1, ControlMode::ZeroControl),
            control: TargetControl::circular(DEFAULT_TARGET_AMPLITUDE),
            mode,
            box_half_width: 5.0,
            dt: DEFAULT_DT,
            t_end: 300.0,
            record_every: DEFAULT_RECORD_EVERY,
        };
        let state = crate::flatspace::FlatState {
            t: 0.0,
            q: FIGURE1_AGENT_Q
                .iter()
                .map(|&a| Vec3::from_array(a))
                .collect(),
            p: FIGURE1_AGENT_P
                .iter()
                .map(|&a| Vec3::from_array(a))
                .collect(),
            q_gamma: Vec3::from_array(FIGURE1_TARGET_Q),
            p_gamma: Vec3::from_array(FIGURE1_TARGET_P),
        };
        (config, state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_leaves_constants_alone() {
        let y = rk4_step(
            |_, _, d| {
                d.fill(0.0);
                Ok(())
            },
            0.0,
            &[1.0, -2.0],
            0.1,
        )
        .unwrap();
        assert_eq!(y, vec![1.0, -2.0]);
    }

    #[test]
    fn rk4_scalar_exponential_truncation() {
        // One step of dx/dt = x from 1 with h = 0.1 lands on the degree-4
        // Taylor value 1 + h + h^2/2 + h^3/6 + h^4/24.
        let y = rk4_step(
            |_, s, d| {
                d[0] = s[0];
                Ok(())
            },
            0.0,
            &[1.0],
            0.1,
        )
        .unwrap();
        assert!((y[0] - 1.1051708333333333).abs() < 1e-15);
    }

    #[test]
    fn rk4_rejects_non_finite_states() {
        let err = rk4_step(
            |_, s, d| {
                d[0] = s[0] * s[0];
                Ok(())
            },
            0.0,
            &[1e300],
            1.0,
        );
        assert!(matches!(err, Err(SimError::NonFiniteState { .. })));
    }

    #[test]
    fn free_target_follows_the_geodesic() {
        // Integrate the target alone and compare against the closed form at
        // a quarter period.
        let q0 = Vec3::EX;
        let p0 = Vec3::EY;
        let dt = 1e-3;
        let steps = (std::f64::consts::FRAC_PI_2 / dt).round() as usize;
        let mut y = vec![q0.x, q0.y, q0.z, p0.x, p0.y, p0.z];
        let mut rk4 = Rk4::new(6);
        for k in 0..steps {
            rk4.step(
                |_, s, d| {
                    let q = Vec3::new(s[0], s[1], s[2]);
                    let p = Vec3::new(s[3], s[4], s[5]);
                    let (dq, dp) = target_rhs_raw(q, p, Vec3::ZERO);
                    d[0] = dq.x;
                    d[1] = dq.y;
                    d[2] = dq.z;
                    d[3] = dp.x;
                    d[4] = dp.y;
                    d[5] = dp.z;
                    Ok(())
                },
                k as f64 * dt,
                &mut y,
                dt,
            )
            .unwrap();
        }
        let t_final = steps as f64 * dt;
        let (q_exact, p_exact) = geodesic_closed_form(q0, p0, t_final);
        let q = Vec3::new(y[0], y[1], y[2]);
        let p = Vec3::new(y[3], y[4], y[5]);
        assert!((q - q_exact).norm() < 1e-8);
        assert!((p - p_exact).norm() < 1e-8);
    }

    #[test]
    fn reference_initial_data_is_projected_admissible() {
        for dataset in [ReferenceData::Spread, ReferenceData::NearTarget] {
            let state = initial_state(&InitialData::Reference(dataset), 0).unwrap();
            assert_eq!(state.agents.len(), 6);
            for a in &state.agents {
                assert!((a.position().norm() - 1.0).abs() < 1e-14);
                assert!(a.position().dot(a.velocity()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn random_initial_data_is_deterministic_and_admissible() {
        let a = initial_state(&InitialData::Random { count: 5 }, 7).unwrap();
        let b = initial_state(&InitialData::Random { count: 5 }, 7).unwrap();
        assert_eq!(a, b);
        for agent in &a.agents {
            assert!((agent.position().norm() - 1.0).abs() < 1e-14);
            assert!(agent.position().dot(agent.velocity()).abs() < 1e-14);
        }
        let c = initial_state(&InitialData::Random { count: 5 }, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn explicit_initial_data_is_validated_strictly() {
        let bad = InitialData::Explicit {
            agents: vec![(Vec3::new(1.0 + 1e-6, 0.0, 0.0), Vec3::ZERO)],
            target: (Vec3::EZ, Vec3::ZERO),
        };
        assert!(matches!(
            initial_state(&bad, 0),
            Err(SimError::InadmissibleInitial { .. })
        ));
    }

    #[test]
    fn short_run_is_deterministic() {
        let mut config = scenarios::figure1();
        config.t_end = 1.0;
        let a = run_simulation(&config).unwrap();
        let b = run_simulation(&config).unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
        for ((sa, da), (sb, db)) in a.samples.iter().zip(b.samples.iter()) {
            assert_eq!(sa, sb);
            assert_eq!(da, db);
        }
    }

    #[test]
    fn records_are_spaced_and_complete() {
        let mut config = scenarios::figure1();
        config.t_end = 0.5;
        config.record_every = 100;
        let run = run_simulation(&config).unwrap();
        assert_eq!(run.samples.len(), 6); // t = 0, 0.1, ..., 0.5
        assert!((run.final_state().t - 0.5).abs() < 1e-12);
        let d0 = &run.samples[0].1;
        assert!(d0.norm_drift < 1e-12);
        assert!(d0.x_inf.is_finite());
    }

    #[test]
    fn sweep_preserves_input_order_and_singleton_matches_run() {
        let mut config = scenarios::figure3();
        config.t_end = 2.0;
        let rows = run_sweep(&config, "c_p", &[4.0], 2.0).unwrap();
        assert_eq!(rows.len(), 1);
        let direct = run_simulation(&config).unwrap();
        assert_eq!(rows[0].d_final, direct.final_diagnostics().d_max);

        let rows = run_sweep(&config, "c_p", &[8.0, 2.0, 4.0], 2.0).unwrap();
        let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
        assert_eq!(values, vec![8.0, 2.0, 4.0]);
    }

    #[test]
    fn oversized_steps_trigger_the_blowup_guard() {
        // RK4 is unstable for this system at dt = 0.2 (the oscillatory modes
        // sit beyond its stability interval), so the agents leave the sphere
        // and the guard aborts the run instead of returning garbage.
        let mut config = scenarios::figure1();
        apply_parameter(&mut config, "dt", 0.2).unwrap();
        config.t_end = 50.0;
        assert!(matches!(
            run_simulation(&config),
            Err(SimError::ConstraintBlowup { .. })
        ));
    }

    #[test]
    fn sweep_rejects_unknown_parameter() {
        let config = scenarios::figure1();
        assert!(matches!(
            run_sweep(&config, "c_z", &[1.0], 1.0),
            Err(SimError::UnknownParameter { .. })
        ));
    }

    #[test]
    fn rk4_order_on_the_geodesic() {
        // Successive halvings of dt shrink the global error ~16x.
        let q0 = Vec3::EX;
        let p0 = Vec3::new(0.0, 1.3, 0.0);
        let t_end = 2.0;
        let mut errors = Vec::new();
        for &dt in &[1e-2_f64, 5e-3, 2.5e-3] {
            let steps = (t_end / dt).round() as usize;
            let mut y = vec![q0.x, q0.y, q0.z, p0.x, p0.y, p0.z];
            let mut rk4 = Rk4::new(6);
            for k in 0..steps {
                rk4.step(
                    |_, s, d| {
                        let q = Vec3::new(s[0], s[1], s[2]);
                        let p = Vec3::new(s[3], s[4], s[5]);
                        let (dq, dp) = target_rhs_raw(q, p, Vec3::ZERO);
                        set_vec3(d, 0, dq);
                        set_vec3(d, 3, dp);
                        Ok(())
                    },
                    k as f64 * dt,
                    &mut y,
                    dt,
                )
                .unwrap();
            }
            let (q_exact, _) = geodesic_closed_form(q0, p0, t_end);
            errors.push((Vec3::new(y[0], y[1], y[2]) - q_exact).norm());
        }
        for pair in errors.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!(
                (8.0..32.0).contains(&ratio),
                "order-4 ratio out of range: {ratio:.2} (errors {errors:?})"
            );
        }
    }
}
