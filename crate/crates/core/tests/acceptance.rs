//! The acceptance gate: one test per quantitative claim, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them alongside the harness
//! output). Tolerances are pinned in `validate` next to the checks.

use std::sync::LazyLock;

use sphere_rendezvous::analysis::{measured_dissipation, rendezvous_metrics};
use sphere_rendezvous::sim::{run_decomposition, run_simulation, run_sweep, scenarios, SimRun};
use sphere_rendezvous::validate::{self, CheckResult};

static FIG1: LazyLock<SimRun> =
    LazyLock::new(|| run_simulation(&scenarios::figure1()).expect("figure-1 run"));
static FIG3: LazyLock<SimRun> =
    LazyLock::new(|| run_simulation(&scenarios::figure3()).expect("figure-3 run"));

fn report(criterion: &str, results: &[CheckResult]) {
    let mut failed = Vec::new();
    for r in results {
        println!(
            "{criterion} [{}] {}: {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
        if !r.passed {
            failed.push(format!("{}: {}", r.name, r.detail));
        }
    }
    assert!(
        failed.is_empty(),
        "{criterion} failed: {}",
        failed.join("; ")
    );
}

#[test]
fn criterion_01_operator_identities() {
    let results = validate::check_operator_identities(10_000, validate::OPERATOR_TOL);
    report("criterion 01 (operator identities)", &results);
}

#[test]
fn criterion_02_constraint_preservation() {
    let results = validate::check_constraint_preservation(&FIG1);
    report("criterion 02 (constraint preservation)", &results);
}

#[test]
fn criterion_03_complete_rendezvous_envelope() {
    let results = validate::check_rendezvous_envelope(&FIG1, 0.1);
    report("criterion 03 (complete rendezvous)", &results);
}

#[test]
fn criterion_04_practical_rendezvous() {
    let mut results = validate::check_practical_bound(&FIG3, 4.0);
    let rows = run_sweep(
        &scenarios::figure3(),
        "c_p",
        &scenarios::figure4b_values(),
        100.0,
    )
    .expect("gain sweep");
    results.extend(validate::check_monotone_gain_sweep(&rows));
    report("criterion 04 (practical rendezvous)", &results);
}

#[test]
fn criterion_05_frame_decomposition() {
    let mut config = scenarios::figure1();
    config.t_end = 50.0;
    let decomposition = run_decomposition(&config).expect("dual integration");
    let results = validate::check_decomposition(&decomposition);
    report("criterion 05 (frame decomposition)", &results);
}

#[test]
fn criterion_06_linearized_residuals() {
    let mut config = scenarios::figure1();
    config.t_end = 10.0;
    config.record_every = 1;
    let run = run_simulation(&config).expect("per-step figure-1 run");
    let results =
        validate::check_linearized_residuals(&run, &config.params).expect("residual evaluation");
    report("criterion 06 (linearized systems)", &results);
}

#[test]
fn criterion_07_spectra() {
    let results = validate::spectra_suite();
    report("criterion 07 (spectra)", &results);
}

#[test]
fn criterion_08_energy_monotonicity() {
    let results = validate::check_energy_dissipation(&FIG1);
    report("criterion 08 (energy monotonicity)", &results);

    // The dissipation coefficient is measured rather than assumed; the fit
    // decides between the damping-gain and bonding-gain readings.
    let energies: Vec<(f64, f64, f64)> = FIG1
        .samples
        .iter()
        .map(|(_, d)| (d.t, d.e_k + d.e_c, d.e_k))
        .collect();
    let c = measured_dissipation(&energies).expect("enough samples");
    println!("criterion 08: measured dissipation coefficient = {c:.6} (c_p = 0.1, c_q = 5)");
    assert!(
        (c - 0.1).abs() < 0.01,
        "measured dissipation {c} should sit at the damping gain c_p = 0.1"
    );
}

#[test]
fn criterion_09_integrator_oracles() {
    let results = validate::oracle_suite();
    report("criterion 09 (integrator oracles)", &results);
}

#[test]
fn criterion_10_negative_control() {
    let run = run_simulation(&scenarios::figure9()).expect("figure-9 run");
    let results = validate::check_negative_control(&run);
    report("criterion 10 (negative control)", &results);

    // The failing run should nevertheless stay on the sphere thanks to the
    // radial feedback, and the tracking error should stay macroscopic from
    // mid-run onward, not just at the final instant.
    let metrics = rendezvous_metrics(&run.states());
    let late_min = metrics
        .iter()
        .filter(|s| s.t >= 100.0)
        .map(|s| s.d_max)
        .fold(f64::INFINITY, f64::min);
    println!("criterion 10: min d_max on [100, 200] = {late_min:.3}");
    assert!(late_min > 0.5);
}

#[test]
fn criterion_11_flocking_robustness_figure3() {
    let mut flocked_config = scenarios::figure3();
    flocked_config.params = flocked_config.params.with_psi(1.0);
    let flocked = run_simulation(&flocked_config).expect("flocked figure-3 run");
    let result = validate::check_flocking_insensitivity("figure3", &FIG3, &flocked);
    report("criterion 11 (flocking robustness, figure 3)", &[result]);
}

/// KNOWN RED. The check is implemented exactly as specified (final tracking
/// errors within 10% relative), and the complete-rendezvous scenario cannot
/// meet it: with `psi = 1` the flocking coupling is ten times the alignment
/// gain `c_p = 0.1`, so it visibly reshapes the transient, and by `t = 200`
/// both runs have decayed to `~1e-5..1e-4` where the prefactor difference
/// shows up as an O(1) relative gap (measured ~0.7 at every late probe time,
/// window-maxed or instantaneous). Both runs still rendezvous completely,
/// under the same envelope, with fitted rates agreeing to three decimals and
/// an absolute difference below 5e-5, so the robustness claim holds in every
/// phase-insensitive reading, but not as a relative comparison of
/// exponentially small numbers. See README, "Known limitations".
#[test]
fn criterion_11_flocking_robustness_figure1() {
    let mut flocked_config = scenarios::figure1();
    flocked_config.params = flocked_config.params.with_psi(1.0);
    let flocked = run_simulation(&flocked_config).expect("flocked figure-1 run");
    let result = validate::check_flocking_insensitivity("figure1", &FIG1, &flocked);
    report("criterion 11 (flocking robustness, figure 1)", &[result]);
}
