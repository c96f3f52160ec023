//! End-to-end checks of the command-line interface: file outputs, exit codes,
//! determinism of seeded runs.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rendezvous"))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

#[test]
fn simulate_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["simulate", "--figure", "1", "--set", "t_end=1"])
        .args(["--out", dir.path().to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());

    let trajectory = read(&dir.path().join("trajectory.csv"));
    let mut lines = trajectory.lines();
    assert_eq!(lines.next().unwrap(), "t,agent_id,qx,qy,qz,px,py,pz");
    // 11 records (t = 0, 0.1, ..., 1.0) x 7 rows (target + 6 agents).
    assert_eq!(trajectory.lines().count(), 1 + 11 * 7);
    let first = lines.next().unwrap();
    assert!(first.starts_with("0.0000000000000000e0,0,"));
    assert!(!trajectory.contains('\r'), "LF line endings only");

    let diagnostics = read(&dir.path().join("diagnostics.csv"));
    assert!(diagnostics
        .lines()
        .next()
        .unwrap()
        .starts_with("t,d_max,v_max,e_k,e_c,norm_drift,orth_drift"));

    let summary = read(&dir.path().join("summary.txt"));
    assert!(summary.contains("rendezvous_condition=holds_by_gain"));
    assert!(summary.contains("n_agents=6"));
}

#[test]
fn seeded_runs_are_bit_identical() {
    let run = |dir: &Path| {
        let status = bin()
            .args(["simulate", "--figure", "1"])
            .args([
                "--set",
                "initial=random:4",
                "--set",
                "t_end=1",
                "--seed",
                "11",
            ])
            .args(["--out", dir.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success());
        (
            std::fs::read(dir.join("trajectory.csv")).unwrap(),
            std::fs::read(dir.join("diagnostics.csv")).unwrap(),
        )
    };
    let a_dir = tempfile::tempdir().unwrap();
    let b_dir = tempfile::tempdir().unwrap();
    let a = run(a_dir.path());
    let b = run(b_dir.path());
    assert_eq!(a.0, b.0, "trajectory bytes must match");
    assert_eq!(a.1, b.1, "diagnostics bytes must match");
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.cfg");
    std::fs::write(
        &config_path,
        "# short practical run\nfigure = 3\nt_end = 1\nrecord_every = 200\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["simulate", "--config", config_path.to_str().unwrap()])
        .args(["--set", "c_p=8", "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let summary = read(&out.join("summary.txt"));
    assert!(
        summary.contains("c_p=8.0000000000000000e0"),
        "flag overrides file"
    );
    assert!(summary.contains("control_mode=ZeroControl"));
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["simulate", "--figure", "1", "--set", "nonsense=1"])
        .args(["--out", dir.path().to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // Parse errors carry the line number.
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "c_p = 4\nwhat\n").unwrap();
    let output = bin()
        .args(["simulate", "--config", bad.to_str().unwrap()])
        .args(["--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains(":2:"), "stderr was: {stderr}");

    let status = bin()
        .args(["simulate", "--out", dir.path().to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2), "a scenario must be selected");
}

#[test]
fn remaining_figure_presets_run() {
    // Figure 5 enables flocking on the complete-rendezvous base; figure 9 is
    // the alignment-off failure mode with radial feedback.
    for (figure, expect) in [
        ("5", "psi=1.0000000000000000e0"),
        ("9", "k0=1.0000000000000000e4"),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let status = bin()
            .args(["simulate", "--figure", figure, "--set", "t_end=1"])
            .args(["--out", dir.path().to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success(), "figure {figure}");
        let summary = read(&dir.path().join("summary.txt"));
        assert!(summary.contains(expect), "figure {figure}: {summary}");
    }
}

#[test]
fn spectra_reports_decay_constants() {
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .args([
            "spectra",
            "--figure",
            "1",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("mu=1.0000000000000001e-1"));
    assert!(stdout.contains("d_practical"));
    assert!(dir.path().join("spectra.txt").exists());
}

#[test]
fn validate_single_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["validate", "--suite", "operators"])
        .args(["--out", dir.path().to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let report = read(&dir.path().join("validate_report.txt"));
    assert!(report.contains("PASS operators.p_transport"));
    assert!(report.ends_with("result=pass\n"));

    let status = bin()
        .args(["validate", "--suite", "nope"])
        .args(["--out", dir.path().to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn decompose_reports_small_gap() {
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .args(["decompose", "--figure", "1", "--set", "t_end=5"])
        .args(["--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(output.status.success());
    let summary = read(&dir.path().join("summary.txt"));
    let gap: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("max_position_gap="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(gap < 1e-6, "gap {gap}");
    assert!(dir.path().join("decomposition.csv").exists());
}

#[test]
fn flat_scenario_runs_through_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["sweep", "--flat", "--figure", "7", "--set", "t_end=2"])
        .args(["--out", dir.path().to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let summary = read(&dir.path().join("summary.txt"));
    assert!(summary.contains("model=flat"));
    assert!(summary.contains("agent_control=match_target"));
    // Positions are wrapped into the display box.
    let trajectory = read(&dir.path().join("trajectory.csv"));
    for line in trajectory.lines().skip(1) {
        let q: Vec<f64> = line
            .split(',')
            .skip(2)
            .take(3)
            .map(|v| v.parse().unwrap())
            .collect();
        assert!(q.iter().all(|c| c.abs() <= 5.0 + 1e-12));
    }
}

#[test]
fn sweep_table_is_ordered_and_written() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args([
            "sweep", "--figure", "3", "--param", "c_p", "--values", "8,2",
        ])
        .args([
            "--set",
            "t_end=2",
            "--probe-time",
            "2",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let sweep = read(&dir.path().join("sweep.csv"));
    let mut lines = sweep.lines();
    assert_eq!(lines.next().unwrap(), "value,d_probe,d_final");
    assert!(lines.next().unwrap().starts_with("8.0000000000000000e0,"));
    assert!(lines.next().unwrap().starts_with("2.0000000000000000e0,"));
}

#[test]
fn flocking_comparison_summary() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["sweep", "--figure", "3", "--flocking", "psi=1"])
        .args([
            "--set",
            "t_end=2",
            "--probe-time",
            "2",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let summary = read(&dir.path().join("summary.txt"));
    assert!(summary.contains("comparison=psi=0 vs psi=1"));
    assert!(summary.contains("relative_final_change="));
}
