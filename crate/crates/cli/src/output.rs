//! CSV and summary-table emission. Floats are written with Rust's shortest
//! round-trip formatting, so re-parsing a file reproduces the exact values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mannsim::controller::ControlMode;
use mannsim::metrics::ComparisonTable;
use mannsim::simulator::Trajectory;

use crate::CliError;

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Failure(format!("writing {}: {e}", path.display())))
}

/// Settling times serialize as seconds, with `inf` for "never settled".
fn fmt_settling(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v}"),
        None => "inf".to_string(),
    }
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let order = traj.states[0].len();
    let width = traj.level1_query[0].len();
    let mut out = String::new();

    out.push('t');
    for i in 1..=order {
        let _ = write!(out, ",x{i}");
    }
    out.push_str(",y_d");
    for i in 1..=order {
        let _ = write!(out, ",e{i}");
    }
    for i in 2..=order {
        let _ = write!(out, ",x_d{i}");
    }
    out.push_str(",u");
    for i in 1..=order {
        let _ = write!(out, ",w_norm{i}");
    }
    for i in 1..=order {
        let _ = write!(out, ",v_norm{i}");
    }
    for i in 1..=order {
        let _ = write!(out, ",mu_norm{i}");
    }
    for j in 1..=width {
        let _ = write!(out, ",q1_{j}");
    }
    if traj.level1_recall_scaled.is_some() {
        for j in 1..=width {
            let _ = write!(out, ",mr1_scaled_{j}");
        }
    }
    out.push('\n');

    for i in 0..traj.len() {
        let _ = write!(out, "{}", traj.times[i]);
        for v in &traj.states[i] {
            let _ = write!(out, ",{v}");
        }
        let _ = write!(out, ",{}", traj.command[i]);
        for v in &traj.errors[i] {
            let _ = write!(out, ",{v}");
        }
        for v in &traj.aux_refs[i][1..] {
            let _ = write!(out, ",{v}");
        }
        let _ = write!(out, ",{}", traj.control[i]);
        for v in &traj.nn_w_norms[i] {
            let _ = write!(out, ",{v}");
        }
        for v in &traj.nn_v_norms[i] {
            let _ = write!(out, ",{v}");
        }
        for v in &traj.memory_norms[i] {
            let _ = write!(out, ",{v}");
        }
        for v in &traj.level1_query[i] {
            let _ = write!(out, ",{v}");
        }
        if let Some(recalls) = &traj.level1_recall_scaled {
            for v in &recalls[i] {
                let _ = write!(out, ",{v}");
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    write_file(path, &trajectory_csv(traj))
}

/// Per-event settling and peak metrics of a single run.
pub fn metrics_csv(
    mode: ControlMode,
    settling: &[(f64, Option<f64>)],
    peaks: &[(f64, f64)],
) -> String {
    let mut out = String::from("mode,event_time,settling_time,peak_deviation\n");
    for ((event_t, settle), (_, peak)) in settling.iter().zip(peaks) {
        let _ = writeln!(
            out,
            "{},{event_t},{},{peak}",
            mode.as_str(),
            fmt_settling(*settle)
        );
    }
    out
}

pub fn write_metrics(
    path: &Path,
    mode: ControlMode,
    settling: &[(f64, Option<f64>)],
    peaks: &[(f64, f64)],
) -> Result<(), CliError> {
    write_file(path, &metrics_csv(mode, settling, peaks))
}

pub fn comparison_csv(table: &ComparisonTable) -> String {
    let mut out = String::new();
    out.push_str("event_time");
    for row in &table.rows {
        let _ = write!(out, ",{}_settling", row.mode.as_str().replace('-', "_"));
    }
    out.push_str(",reduction_percent");
    for row in &table.rows {
        let _ = write!(out, ",{}_peak", row.mode.as_str().replace('-', "_"));
    }
    out.push('\n');
    for (idx, event_t) in table.event_times.iter().enumerate() {
        let _ = write!(out, "{event_t}");
        for row in &table.rows {
            let _ = write!(out, ",{}", fmt_settling(row.settling[idx]));
        }
        match table.reduction_percent(idx) {
            Some(p) => {
                let _ = write!(out, ",{p}");
            }
            None => out.push_str(",inf"),
        }
        for row in &table.rows {
            let _ = write!(out, ",{}", row.peaks[idx]);
        }
        out.push('\n');
    }
    out
}

pub fn write_comparison(path: &Path, table: &ComparisonTable) -> Result<(), CliError> {
    write_file(path, &comparison_csv(table))
}

pub fn write_summary(path: &Path, summary: &str) -> Result<(), CliError> {
    write_file(path, summary)
}
