//! File emission: CSV with a fixed column order and fixed float formatting
//! (17 significant digits, LF line endings), plus key=value summaries.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sphere_rendezvous::dynamics::SystemState;
use sphere_rendezvous::flatspace::{wrap_to_box, FlatState};
use sphere_rendezvous::sim::{DecompositionSample, DiagnosticsRecord, SweepRow};

/// 17 significant digits: enough to round-trip any f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_lines(path: &Path, lines: &[String]) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for line in lines {
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// `t, agent_id, qx, qy, qz, px, py, pz` with the target as agent 0.
pub fn write_trajectory(dir: &Path, states: &[SystemState]) -> std::io::Result<PathBuf> {
    let mut lines = vec!["t,agent_id,qx,qy,qz,px,py,pz".to_string()];
    for state in states {
        let mut push = |id: usize, q: [f64; 3], p: [f64; 3]| {
            lines.push(format!(
                "{},{},{},{},{},{},{},{}",
                fmt_f64(state.t),
                id,
                fmt_f64(q[0]),
                fmt_f64(q[1]),
                fmt_f64(q[2]),
                fmt_f64(p[0]),
                fmt_f64(p[1]),
                fmt_f64(p[2])
            ));
        };
        push(
            0,
            state.target.position().to_array(),
            state.target.velocity().to_array(),
        );
        for (i, a) in state.agents.iter().enumerate() {
            push(i + 1, a.position().to_array(), a.velocity().to_array());
        }
    }
    let path = dir.join("trajectory.csv");
    write_lines(&path, &lines)?;
    Ok(path)
}

/// Same layout for the flat model; positions are wrapped into the display box.
pub fn write_flat_trajectory(
    dir: &Path,
    states: &[FlatState],
    box_half_width: f64,
) -> std::io::Result<PathBuf> {
    let mut lines = vec!["t,agent_id,qx,qy,qz,px,py,pz".to_string()];
    for state in states {
        let mut push = |id: usize, q: [f64; 3], p: [f64; 3]| {
            lines.push(format!(
                "{},{},{},{},{},{},{},{}",
                fmt_f64(state.t),
                id,
                fmt_f64(q[0]),
                fmt_f64(q[1]),
                fmt_f64(q[2]),
                fmt_f64(p[0]),
                fmt_f64(p[1]),
                fmt_f64(p[2])
            ));
        };
        push(
            0,
            wrap_to_box(state.q_gamma, box_half_width).to_array(),
            state.p_gamma.to_array(),
        );
        for i in 0..state.agent_count() {
            push(
                i + 1,
                wrap_to_box(state.q[i], box_half_width).to_array(),
                state.p[i].to_array(),
            );
        }
    }
    let path = dir.join("trajectory.csv");
    write_lines(&path, &lines)?;
    Ok(path)
}

/// Mirrors the diagnostics record field order.
pub fn write_diagnostics(dir: &Path, records: &[DiagnosticsRecord]) -> std::io::Result<PathBuf> {
    let mut lines =
        vec!["t,d_max,v_max,e_k,e_c,norm_drift,orth_drift,xg1,xg2,xg3,x1,x2,x3,x_inf".to_string()];
    for d in records {
        let x = d.x6.to_array();
        lines.push(
            [
                fmt_f64(d.t),
                fmt_f64(d.d_max),
                fmt_f64(d.v_max),
                fmt_f64(d.e_k),
                fmt_f64(d.e_c),
                fmt_f64(d.norm_drift),
                fmt_f64(d.orth_drift),
                fmt_f64(x[0]),
                fmt_f64(x[1]),
                fmt_f64(x[2]),
                fmt_f64(x[3]),
                fmt_f64(x[4]),
                fmt_f64(x[5]),
                fmt_f64(d.x_inf),
            ]
            .join(","),
        );
    }
    let path = dir.join("diagnostics.csv");
    write_lines(&path, &lines)?;
    Ok(path)
}

pub fn write_sweep(dir: &Path, rows: &[SweepRow]) -> std::io::Result<PathBuf> {
    let mut lines = vec!["value,d_probe,d_final".to_string()];
    for r in rows {
        lines.push(format!(
            "{},{},{}",
            fmt_f64(r.value),
            fmt_f64(r.d_probe),
            fmt_f64(r.d_final)
        ));
    }
    let path = dir.join("sweep.csv");
    write_lines(&path, &lines)?;
    Ok(path)
}

pub fn write_decomposition(
    dir: &Path,
    samples: &[DecompositionSample],
) -> std::io::Result<PathBuf> {
    let mut lines = vec!["t,position_gap,anchor_drift".to_string()];
    for s in samples {
        lines.push(format!(
            "{},{},{}",
            fmt_f64(s.t),
            fmt_f64(s.position_gap),
            fmt_f64(s.anchor_drift)
        ));
    }
    let path = dir.join("decomposition.csv");
    write_lines(&path, &lines)?;
    Ok(path)
}

/// key=value summary, one pair per line.
pub fn write_summary(dir: &Path, pairs: &[(String, String)]) -> std::io::Result<PathBuf> {
    let lines: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let path = dir.join("summary.txt");
    write_lines(&path, &lines)?;
    Ok(path)
}
