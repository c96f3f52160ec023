//! Named check suites: the runtime face of the quantitative claims.
//!
//! Each suite produces a list of pass/fail results with a one-line detail, so
//! the same checks can back both the integration tests and the `validate`
//! command. Thresholds live here, next to the checks that use them, and are
//! fixed; nothing is calibrated at run time.

use std::time::Instant;

use crate::analysis::{
    aux_functionals, fit_exponential_rate, matrix_m, matrix_minf, max_eigenvalue_mismatch,
    measured_dissipation, numeric_eigenvalues3, numeric_eigenvalues6, rendezvous_metrics, spectrum,
    weighted_functionals,
};
use crate::dynamics::{ControlMode, ModelParams};
use crate::flatspace::qd_closed_form;
use crate::frame::structural_snapshot;
use crate::geom::{cross, p_rot_raw, rodrigues_raw, tangent_project_raw, Matrix3, Vec3};
use crate::rng::SplitMix64;
use crate::sim::{
    geodesic_closed_form, run_decomposition, run_simulation, run_sweep, scenarios,
    DecompositionReport, Rk4, SimError, SimRun, SweepRow,
};

/// Seed for every randomized check: fixed so reruns are bit-identical.
pub const VALIDATION_SEED: u64 = 0x5EED;

/// Operator-identity tolerance.
pub const OPERATOR_TOL: f64 = 1e-12;
/// Constraint drift allowed over the full complete-rendezvous run.
pub const DRIFT_TOL: f64 = 1e-5;
/// Dual-integration agreement over the decomposition horizon.
pub const DECOMPOSITION_TOL: f64 = 1e-6;
/// Linearized-system residual scale: `1e-4 * (1 + ||X||)`.
pub const LINEARIZED_TOL: f64 = 1e-4;
/// Closed-form versus numeric eigenvalue agreement.
pub const SPECTRUM_TOL: f64 = 1e-9;
/// Per-step energy increase allowed (roundoff allowance on a dissipative
/// quantity).
pub const ENERGY_MONOTONE_TOL: f64 = 1e-8;
/// Geodesic oracle error at t = 10 with dt = 1e-3.
pub const GEODESIC_TOL: f64 = 1e-8;
/// Flat closed-form versus RK4 at t = 10.
pub const FLAT_CLOSED_FORM_TOL: f64 = 1e-6;
/// Relative change in final tracking error allowed when flocking is enabled.
pub const FLOCKING_RELATIVE_TOL: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        CheckResult {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

pub const SUITES: &[&str] = &[
    "operators",
    "constraints",
    "rendezvous",
    "practical",
    "frame",
    "linearized",
    "spectra",
    "energy",
    "oracles",
    "negative-control",
    "flocking",
];

/// Runs one named suite. `None` for an unknown name.
pub fn run_suite(name: &str) -> Option<Result<Vec<CheckResult>, SimError>> {
    let out = match name {
        "operators" => Ok(operator_suite()),
        "constraints" => figure1_run().map(|run| check_constraint_preservation(&run)),
        "rendezvous" => figure1_run().map(|run| check_rendezvous_envelope(&run, 0.1)),
        "practical" => practical_suite(),
        "frame" => decomposition_suite(),
        "linearized" => linearized_suite(),
        "spectra" => Ok(spectra_suite()),
        "energy" => figure1_run().map(|run| check_energy_dissipation(&run)),
        "oracles" => Ok(oracle_suite()),
        "negative-control" => negative_control_suite(),
        "flocking" => flocking_suite(),
        _ => return None,
    };
    Some(out)
}

/// Runs every suite in declaration order.
pub fn run_all() -> Result<Vec<(String, Vec<CheckResult>)>, SimError> {
    let mut out = Vec::new();
    for &name in SUITES {
        let results = run_suite(name).expect("registered suite")?;
        out.push((name.to_string(), results));
    }
    Ok(out)
}

/// The complete-rendezvous reference run shared by several suites.
pub fn figure1_run() -> Result<SimRun, SimError> {
    run_simulation(&scenarios::figure1())
}

// ---------------------------------------------------------------------------
// Operator identities.
// ---------------------------------------------------------------------------

/// Transport and orthogonality identities over seeded random unit pairs.
pub fn operator_suite() -> Vec<CheckResult> {
    check_operator_identities(10_000, OPERATOR_TOL)
}

pub fn check_operator_identities(pairs: usize, tol: f64) -> Vec<CheckResult> {
    let start = Instant::now();
    let mut rng = SplitMix64::new(VALIDATION_SEED);

    let mut worst_map = 0.0f64; // P z1 = z2
    let mut worst_reflect = 0.0f64; // P z2 = 2<z1,z2> z2 - z1
    let mut worst_tangent = 0.0f64; // <P v, z2> = 0 for v tangent at z1
    let mut worst_transpose = 0.0f64; // P^T = reverse transport
    let mut worst_ptp = 0.0f64; // P^T P fixes z1 and z2
    let mut worst_axis = 0.0f64; // P (z1 x z2) = <z1,z2> (z1 x z2)
    let mut worst_det = 0.0f64; // det P = <z1,z2>
    let mut worst_rot_ortho = 0.0f64; // R^T R = I
    let mut worst_rot_det = 0.0f64; // det R = 1
    let mut worst_rot_map = 0.0f64; // R z1 = z2 and tangent-to-tangent

    for _ in 0..pairs {
        let z1 = rng.unit_vector();
        let z2 = rng.unit_vector();
        let p = p_rot_raw(z1, z2);

        worst_map = worst_map.max((p.mul_vec(z1) - z2).norm());
        let reflected = 2.0 * z1.dot(z2) * z2 - z1;
        worst_reflect = worst_reflect.max((p.mul_vec(z2) - reflected).norm());

        let v = tangent_project_raw(z1, rng.vec3_in_cube(1.0));
        worst_tangent = worst_tangent.max(p.mul_vec(v).dot(z2).abs());

        worst_transpose = worst_transpose.max(p.transpose().max_abs_diff(p_rot_raw(z2, z1)));
        let ptp = p.transpose().mul_mat(p);
        worst_ptp = worst_ptp
            .max((ptp.mul_vec(z1) - z1).norm())
            .max((ptp.mul_vec(z2) - z2).norm());

        let axis = cross(z1, z2);
        worst_axis = worst_axis.max((p.mul_vec(axis) - z1.dot(z2) * axis).norm());
        worst_det = worst_det.max((p.det() - z1.dot(z2)).abs());

        if let Ok(r) = rodrigues_raw(z1, z2) {
            worst_rot_ortho =
                worst_rot_ortho.max(r.transpose().mul_mat(r).max_abs_diff(Matrix3::identity()));
            worst_rot_det = worst_rot_det.max((r.det() - 1.0).abs());
            worst_rot_map = worst_rot_map
                .max((r.mul_vec(z1) - z2).norm())
                .max(r.mul_vec(v).dot(z2).abs());
        }
    }
    let elapsed = start.elapsed().as_secs_f64();

    let mut results = vec![
        CheckResult::new(
            "p_transport",
            worst_map <= tol && worst_reflect <= tol,
            format!("max |P z1 - z2| = {worst_map:.2e}, reflection residual {worst_reflect:.2e}"),
        ),
        CheckResult::new(
            "p_tangent_to_tangent",
            worst_tangent <= tol,
            format!("max |<P v, z2>| = {worst_tangent:.2e}"),
        ),
        CheckResult::new(
            "p_transpose_reverses",
            worst_transpose <= tol && worst_ptp <= tol,
            format!("transpose residual {worst_transpose:.2e}, P^T P fixing residual {worst_ptp:.2e}"),
        ),
        CheckResult::new(
            "p_axis_and_determinant",
            worst_axis <= tol && worst_det <= tol,
            format!("axis eigen residual {worst_axis:.2e}, det - <z1,z2> = {worst_det:.2e}"),
        ),
        CheckResult::new(
            "rodrigues_special_orthogonal",
            worst_rot_ortho <= tol && worst_rot_det <= tol && worst_rot_map <= tol,
            format!(
                "|R^T R - I| = {worst_rot_ortho:.2e}, |det R - 1| = {worst_rot_det:.2e}, transport {worst_rot_map:.2e}"
            ),
        ),
    ];
    results.push(CheckResult::new(
        "operator_suite_runtime",
        elapsed < 1.0,
        format!("{pairs} pairs in {elapsed:.3} s (budget 1 s)"),
    ));
    results
}

// ---------------------------------------------------------------------------
// Long-horizon simulation checks.
// ---------------------------------------------------------------------------

/// Constraint preservation without renormalization.
pub fn check_constraint_preservation(run: &SimRun) -> Vec<CheckResult> {
    let norm_drift = run
        .samples
        .iter()
        .map(|(_, d)| d.norm_drift)
        .fold(0.0, f64::max);
    let orth_drift = run
        .samples
        .iter()
        .map(|(_, d)| d.orth_drift)
        .fold(0.0, f64::max);
    vec![
        CheckResult::new(
            "norm_drift",
            norm_drift <= DRIFT_TOL,
            format!("max | ||q|| - 1 | = {norm_drift:.3e} (tol {DRIFT_TOL:.0e})"),
        ),
        CheckResult::new(
            "orthogonality_drift",
            orth_drift <= DRIFT_TOL,
            format!("max |<q, p>| = {orth_drift:.3e} (tol {DRIFT_TOL:.0e})"),
        ),
        CheckResult::new(
            "runtime",
            run.wall_time_s < 30.0,
            format!("{:.1} s (budget 30 s)", run.wall_time_s),
        ),
    ]
}

/// The exponential tracking envelope `d_max(t) <= 2 exp((-c_p + 0.05)(t - 40))`
/// over `t` in `[40, 200]`.
pub fn check_rendezvous_envelope(run: &SimRun, c_p: f64) -> Vec<CheckResult> {
    let metrics = rendezvous_metrics(&run.states());
    let mut worst_margin = f64::INFINITY;
    let mut worst_t = 0.0;
    let mut violated = false;
    for s in metrics.iter().filter(|s| s.t >= 40.0 && s.t <= 200.0) {
        let envelope = 2.0 * ((-c_p + 0.05) * (s.t - 40.0)).exp();
        let margin = envelope - s.d_max;
        if margin < worst_margin {
            worst_margin = margin;
            worst_t = s.t;
        }
        if s.d_max > envelope {
            violated = true;
        }
    }
    let final_d = metrics.last().map(|s| s.d_max).unwrap_or(f64::NAN);
    let fit = fit_exponential_rate(&metrics, (40.0, 200.0));
    let rate = fit.map(|f| f.rate).unwrap_or(f64::NAN);
    vec![
        CheckResult::new(
            "exponential_envelope",
            !violated,
            format!(
                "tightest margin {worst_margin:.3e} at t = {worst_t:.1}; fitted rate {rate:.4}"
            ),
        ),
        CheckResult::new(
            "final_tracking_error",
            final_d < 1e-3,
            format!("d_max(200) = {final_d:.3e}"),
        ),
    ]
}

fn practical_suite() -> Result<Vec<CheckResult>, SimError> {
    let run = run_simulation(&scenarios::figure3())?;
    let mut results = check_practical_bound(&run, 4.0);
    let rows = run_sweep(
        &scenarios::figure3(),
        "c_p",
        &scenarios::figure4b_values(),
        100.0,
    )?;
    results.extend(check_monotone_gain_sweep(&rows));
    Ok(results)
}

/// `d_max(t) <= 2 / sqrt(c_p)` for `t` in `[50, 200]`.
pub fn check_practical_bound(run: &SimRun, c_p: f64) -> Vec<CheckResult> {
    let bound = 2.0 / c_p.sqrt();
    let metrics = rendezvous_metrics(&run.states());
    let worst = metrics
        .iter()
        .filter(|s| s.t >= 50.0 && s.t <= 200.0)
        .map(|s| s.d_max)
        .fold(0.0, f64::max);
    vec![CheckResult::new(
        "practical_bound",
        worst <= bound,
        format!("max d_max on [50, 200] = {worst:.4} (bound {bound:.4})"),
    )]
}

/// Tracking error at the probe time strictly decreases with the alignment
/// gain.
pub fn check_monotone_gain_sweep(rows: &[SweepRow]) -> Vec<CheckResult> {
    let strictly_decreasing = rows.windows(2).all(|w| w[1].d_probe < w[0].d_probe);
    let table: Vec<String> = rows
        .iter()
        .map(|r| format!("c_p={}: d={:.4}", r.value, r.d_probe))
        .collect();
    vec![CheckResult::new(
        "gain_sweep_monotone",
        strictly_decreasing,
        table.join(", "),
    )]
}

// ---------------------------------------------------------------------------
// Frame decomposition.
// ---------------------------------------------------------------------------

fn decomposition_suite() -> Result<Vec<CheckResult>, SimError> {
    let mut config = scenarios::figure1();
    config.t_end = 50.0;
    let report = run_decomposition(&config)?;
    Ok(check_decomposition(&report))
}

pub fn check_decomposition(report: &DecompositionReport) -> Vec<CheckResult> {
    vec![
        CheckResult::new(
            "dual_integration_agreement",
            report.max_position_gap <= DECOMPOSITION_TOL,
            format!(
                "max ||q_i - S x_i|| = {:.3e} (tol {DECOMPOSITION_TOL:.0e})",
                report.max_position_gap
            ),
        ),
        CheckResult::new(
            "anchor_constancy",
            report.max_anchor_drift <= DECOMPOSITION_TOL,
            format!("max ||S^T q_g - q_g(0)|| = {:.3e}", report.max_anchor_drift),
        ),
    ]
}

// ---------------------------------------------------------------------------
// Linearized systems.
// ---------------------------------------------------------------------------

fn linearized_suite() -> Result<Vec<CheckResult>, SimError> {
    let mut config = scenarios::figure1();
    config.t_end = 10.0;
    config.record_every = 1;
    let run = run_simulation(&config)?;
    check_linearized_residuals(&run, &config.params)
}

/// Central-difference `dX/dt` against `M X + F` along a trajectory recorded at
/// every step, for the six-dimensional system and the per-agent weighted one.
pub fn check_linearized_residuals(
    run: &SimRun,
    params: &ModelParams,
) -> Result<Vec<CheckResult>, SimError> {
    assert!(
        params.control_mode == ControlMode::FullInfo,
        "A = 0 requires full information"
    );
    let n = run.samples[0].0.agents.len();
    let zeros = vec![Vec3::ZERO; n];
    let m6 = matrix_m(params)?;
    let m3 = matrix_minf(params);

    let mut xs = Vec::with_capacity(run.samples.len());
    let mut fs = Vec::with_capacity(run.samples.len());
    let mut wxs = Vec::with_capacity(run.samples.len());
    let mut wfs = Vec::with_capacity(run.samples.len());
    let mut times = Vec::with_capacity(run.samples.len());
    for (state, _) in &run.samples {
        let snapshot = structural_snapshot(state)?;
        let (x, f) = aux_functionals(&snapshot, params, &zeros)?;
        xs.push(x.to_array());
        fs.push(f.to_array());
        let mut wx_row = Vec::with_capacity(n);
        let mut wf_row = Vec::with_capacity(n);
        for i in 0..n {
            let (xi, fi) = weighted_functionals(&snapshot, params, &zeros, i)?;
            wx_row.push(xi.to_array());
            wf_row.push(fi.to_array());
        }
        wxs.push(wx_row);
        wfs.push(wf_row);
        times.push(state.t);
    }

    let mut worst6 = 0.0f64;
    let mut worst3 = 0.0f64;
    let mut samples_checked = 0usize;
    for k in 1..times.len() - 1 {
        let dt2 = times[k + 1] - times[k - 1];
        let x_norm = xs[k].iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = 1.0 + x_norm;
        let model = m6.mul_vec(xs[k]);
        for c in 0..6 {
            let fd = (xs[k + 1][c] - xs[k - 1][c]) / dt2;
            worst6 = worst6.max((fd - model[c] - fs[k][c]).abs() / scale);
        }
        for i in 0..n {
            let xi_norm = wxs[k][i].iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale_i = 1.0 + xi_norm;
            let model = m3.mul_vec(Vec3::from_array(wxs[k][i])).to_array();
            for c in 0..3 {
                let fd = (wxs[k + 1][i][c] - wxs[k - 1][i][c]) / dt2;
                worst3 = worst3.max((fd - model[c] - wfs[k][i][c]).abs() / scale_i);
            }
        }
        samples_checked += 1;
    }

    Ok(vec![
        CheckResult::new(
            "six_dim_residual",
            worst6 <= LINEARIZED_TOL,
            format!(
                "max residual / (1 + ||X||) = {worst6:.3e} over {samples_checked} samples (tol {LINEARIZED_TOL:.0e})"
            ),
        ),
        CheckResult::new(
            "weighted_residual",
            worst3 <= LINEARIZED_TOL,
            format!("max residual / (1 + ||X_i||) = {worst3:.3e} (tol {LINEARIZED_TOL:.0e})"),
        ),
    ])
}

// ---------------------------------------------------------------------------
// Spectra.
// ---------------------------------------------------------------------------

pub fn spectra_suite() -> Vec<CheckResult> {
    let mut rng = SplitMix64::new(VALIDATION_SEED);
    let mut worst6 = 0.0f64;
    let mut worst3 = 0.0f64;
    for _ in 0..100 {
        let sigma = rng.uniform() * 10.0 + 1e-6;
        let c_q = rng.uniform() * 10.0 + 1e-6;
        let c_p = rng.uniform() * 10.0 + 1e-6;
        let params = ModelParams::new(sigma, c_q, c_p, ControlMode::FullInfo);
        let sp = spectrum(&params).expect("constant sigma");
        let num6 = numeric_eigenvalues6(&matrix_m(&params).expect("constant sigma"));
        let num3 = numeric_eigenvalues3(&matrix_minf(&params));
        worst6 = worst6.max(max_eigenvalue_mismatch(&sp.eig_m, &num6));
        worst3 = worst3.max(max_eigenvalue_mismatch(&sp.eig_minf, &num3));
    }

    let fig1 = ModelParams::new(1.0, 5.0, 0.1, ControlMode::FullInfo);
    let mu = spectrum(&fig1).expect("constant sigma").mu;

    vec![
        CheckResult::new(
            "closed_form_vs_numeric",
            worst6 <= SPECTRUM_TOL && worst3 <= SPECTRUM_TOL,
            format!("worst mismatch: M {worst6:.2e}, M_inf {worst3:.2e} over 100 triples"),
        ),
        CheckResult::new(
            "mu_figure_one",
            (mu - 0.1).abs() < 1e-12,
            format!("mu(sigma=1, c_q=5, c_p=0.1) = {mu}"),
        ),
    ]
}

// ---------------------------------------------------------------------------
// Energy.
// ---------------------------------------------------------------------------

/// Energy is nonincreasing along the full-information run, and the fitted
/// dissipation coefficient is reported: the derivation damps through
/// `-c_p v_i`, and the measurement decides between the `c_p` and `c_q`
/// readings of the dissipation identity.
pub fn check_energy_dissipation(run: &SimRun) -> Vec<CheckResult> {
    let energies: Vec<(f64, f64, f64)> = run
        .samples
        .iter()
        .map(|(_, d)| (d.t, d.e_k + d.e_c, d.e_k))
        .collect();
    let mut worst_increase = 0.0f64;
    for w in energies.windows(2) {
        worst_increase = worst_increase.max(w[1].1 - w[0].1);
    }
    let coefficient = measured_dissipation(&energies).unwrap_or(f64::NAN);
    vec![
        CheckResult::new(
            "energy_monotone",
            worst_increase <= ENERGY_MONOTONE_TOL,
            format!("largest per-record increase {worst_increase:.3e} (tol {ENERGY_MONOTONE_TOL:.0e})"),
        ),
        CheckResult::new(
            "dissipation_coefficient",
            coefficient.is_finite(),
            format!(
                "measured c = {coefficient:.6} with c_p = 0.1 and c_q = 5: the fit selects the damping gain"
            ),
        ),
    ]
}

// ---------------------------------------------------------------------------
// Integrator oracles.
// ---------------------------------------------------------------------------

pub fn oracle_suite() -> Vec<CheckResult> {
    let mut results = Vec::new();

    // Geodesic closed form at t = 10, dt = 1e-3.
    let q0 = Vec3::EX;
    let p0 = Vec3::new(0.0, 0.7, 0.4);
    let dt = 1e-3_f64;
    let steps = (10.0 / dt).round() as usize;
    let mut y = vec![q0.x, q0.y, q0.z, p0.x, p0.y, p0.z];
    let mut rk4 = Rk4::new(6);
    for k in 0..steps {
        rk4.step(
            |_, s, d| {
                let q = Vec3::new(s[0], s[1], s[2]);
                let p = Vec3::new(s[3], s[4], s[5]);
                let dp = q * (-p.norm_squared() / q.norm_squared());
                d[0] = p.x;
                d[1] = p.y;
                d[2] = p.z;
                d[3] = dp.x;
                d[4] = dp.y;
                d[5] = dp.z;
                Ok(())
            },
            k as f64 * dt,
            &mut y,
            dt,
        )
        .expect("finite");
    }
    let (q_exact, _) = geodesic_closed_form(q0, p0, 10.0);
    let geo_err = (Vec3::new(y[0], y[1], y[2]) - q_exact).norm();
    results.push(CheckResult::new(
        "geodesic_closed_form",
        geo_err <= GEODESIC_TOL,
        format!("|q(10) - exact| = {geo_err:.3e} (tol {GEODESIC_TOL:.0e})"),
    ));

    // Flat tracking closed form against an independent RK4 integration.
    let qd0 = Vec3::new(1.0, -0.3, 0.5);
    let pd0 = Vec3::new(0.2, 0.1, -0.4);
    let (c_q, c_p) = (5.0, 0.1);
    let mut y = vec![qd0.x, qd0.y, qd0.z, pd0.x, pd0.y, pd0.z];
    let mut rk4 = Rk4::new(6);
    for k in 0..steps {
        rk4.step(
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
            &mut y,
            dt,
        )
        .expect("finite");
    }
    let closed = qd_closed_form(qd0, pd0, c_q, c_p, 10.0);
    let flat_err = (closed - Vec3::new(y[0], y[1], y[2])).norm();
    results.push(CheckResult::new(
        "flat_closed_form",
        flat_err <= FLAT_CLOSED_FORM_TOL,
        format!("|q_d(10) - RK4| = {flat_err:.3e} (tol {FLAT_CLOSED_FORM_TOL:.0e})"),
    ));

    // Fourth-order convergence across three step sizes.
    let mut errors = Vec::new();
    for &dt in &[1e-2_f64, 5e-3, 2.5e-3] {
        let steps = (2.0 / dt).round() as usize;
        let mut y = vec![1.0, 0.0, 0.0, 0.0, 1.3, 0.0];
        let mut rk4 = Rk4::new(6);
        for k in 0..steps {
            rk4.step(
                |_, s, d| {
                    let q = Vec3::new(s[0], s[1], s[2]);
                    let p = Vec3::new(s[3], s[4], s[5]);
                    let dp = q * (-p.norm_squared() / q.norm_squared());
                    d[0] = p.x;
                    d[1] = p.y;
                    d[2] = p.z;
                    d[3] = dp.x;
                    d[4] = dp.y;
                    d[5] = dp.z;
                    Ok(())
                },
                k as f64 * dt,
                &mut y,
                dt,
            )
            .expect("finite");
        }
        let (q_exact, _) = geodesic_closed_form(Vec3::EX, Vec3::new(0.0, 1.3, 0.0), 2.0);
        errors.push((Vec3::new(y[0], y[1], y[2]) - q_exact).norm());
    }
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let order_ok = ratios.iter().all(|r| (8.0..32.0).contains(r));
    results.push(CheckResult::new(
        "rk4_order",
        order_ok,
        format!("halving ratios {ratios:?} (expect ~16)"),
    ));

    results
}

// ---------------------------------------------------------------------------
// Negative control and flocking robustness.
// ---------------------------------------------------------------------------

fn negative_control_suite() -> Result<Vec<CheckResult>, SimError> {
    let run = run_simulation(&scenarios::figure9())?;
    Ok(check_negative_control(&run))
}

/// Without velocity alignment the agents fail to track: the final error stays
/// macroscopic.
pub fn check_negative_control(run: &SimRun) -> Vec<CheckResult> {
    let final_d = run.final_diagnostics().d_max;
    vec![CheckResult::new(
        "alignment_is_necessary",
        final_d > 0.5,
        format!("d_max(200) = {final_d:.3} with c_p = 0, k0 = 1e4"),
    )]
}

fn flocking_suite() -> Result<Vec<CheckResult>, SimError> {
    let mut results = Vec::new();
    for (label, base) in [
        ("figure1", scenarios::figure1()),
        ("figure3", scenarios::figure3()),
    ] {
        let plain = run_simulation(&base)?;
        let mut flocked_config = base.clone();
        flocked_config.params = flocked_config.params.with_psi(1.0);
        let flocked = run_simulation(&flocked_config)?;
        results.push(check_flocking_insensitivity(label, &plain, &flocked));
    }
    Ok(results)
}

/// Enabling the rotational flocking term moves the final tracking error by
/// less than [`FLOCKING_RELATIVE_TOL`] relative.
pub fn check_flocking_insensitivity(label: &str, plain: &SimRun, flocked: &SimRun) -> CheckResult {
    let d0 = plain.final_diagnostics().d_max;
    let d1 = flocked.final_diagnostics().d_max;
    let relative = (d1 - d0).abs() / d0;
    CheckResult::new(
        &format!("flocking_insensitivity_{label}"),
        relative < FLOCKING_RELATIVE_TOL,
        format!("d_max(200): psi=0 -> {d0:.4e}, psi=1 -> {d1:.4e}, relative change {relative:.3}"),
    )
}
