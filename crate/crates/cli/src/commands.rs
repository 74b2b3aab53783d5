//! Subcommand implementations: single-mode runs, the three-mode comparison,
//! and config validation. All return `CliError` so the binary can map
//! failures onto its documented exit codes.

use std::fs;
use std::path::Path;
use std::time::Instant;

use mannsim::controller::ControlMode;
use mannsim::metrics::{
    comparison_table, peak_deviation, settling_time, ComparisonTable, SettlingSpec,
};
use mannsim::plant::validate_assumption;
use mannsim::simulator::{simulate, Trajectory};

use crate::config::{Experiment, ExperimentConfig};
use crate::output;
use crate::{verbose, CliError};

const COMPARE_MODES: [ControlMode; 3] =
    [ControlMode::Nn, ControlMode::Mann, ControlMode::MannFrozen];

/// Box half-width of the sampled gain-bound check.
const VALIDATION_BOX: f64 = 2.0;
const VALIDATION_SAMPLES: usize = 1000;

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Failure(format!("reading {}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text)
}

fn ensure_out_dir(out_dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Failure(format!("creating {}: {e}", out_dir.display())))
}

fn settling_spec(exp: &Experiment) -> Result<SettlingSpec, CliError> {
    SettlingSpec::for_scenario(
        exp.band_fraction,
        exp.band_mode,
        &exp.script,
        exp.run.horizon,
    )
    .map_err(CliError::from)
}

/// Per-window (event time, settling time) pairs; `None` means never settled.
type SettlingByEvent = Vec<(f64, Option<f64>)>;
/// Per-window (event time, peak deviation) pairs.
type PeaksByEvent = Vec<(f64, f64)>;

fn per_event_metrics(
    exp: &Experiment,
    spec: &SettlingSpec,
    traj: &Trajectory,
) -> Result<(SettlingByEvent, PeaksByEvent), CliError> {
    let mut settles = Vec::with_capacity(spec.windows.len());
    let mut peaks = Vec::with_capacity(spec.windows.len());
    for window in &spec.windows {
        settles.push((
            window.start,
            settling_time(traj, window.start, spec, &exp.command)?,
        ));
        peaks.push((window.start, peak_deviation(traj, window, &exp.command)?));
    }
    Ok((settles, peaks))
}

pub fn cmd_run(
    config_path: &Path,
    mode: ControlMode,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    let exp = load_config(config_path)?.build(mode, seed_override)?;
    if verbose() {
        eprintln!(
            "[mannsim] run mode={} seed={} horizon={}s step={}s",
            mode.as_str(),
            exp.run.seed,
            exp.run.horizon,
            exp.run.step
        );
    }
    let start = Instant::now();
    let traj = simulate(&exp.system, &exp.script, &exp.command, &exp.run)?;
    if verbose() {
        eprintln!(
            "[mannsim] simulated {} samples in {:.2?}",
            traj.len(),
            start.elapsed()
        );
    }
    ensure_out_dir(out_dir)?;
    output::write_trajectory(&out_dir.join("trajectory.csv"), &traj)?;
    let spec = settling_spec(&exp)?;
    let (settles, peaks) = per_event_metrics(&exp, &spec, &traj)?;
    output::write_metrics(&out_dir.join("metrics.csv"), mode, &settles, &peaks)?;
    println!(
        "wrote {} and {}",
        out_dir.join("trajectory.csv").display(),
        out_dir.join("metrics.csv").display()
    );
    Ok(())
}

pub fn cmd_compare(
    config_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    let config = load_config(config_path)?;
    // One experiment per mode; everything except the mode (and the frozen
    // mode's write constant) is identical, including the weight seed.
    let experiments: Vec<Experiment> = COMPARE_MODES
        .iter()
        .map(|&mode| config.build(mode, seed_override))
        .collect::<Result<_, _>>()?;

    let start = Instant::now();
    let results: Vec<Result<Trajectory, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = experiments
            .iter()
            .map(|exp| {
                scope.spawn(move || {
                    simulate(&exp.system, &exp.script, &exp.command, &exp.run)
                        .map_err(CliError::from)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("no panic")).collect()
    });
    let mut trajectories = Vec::with_capacity(COMPARE_MODES.len());
    for (mode, result) in COMPARE_MODES.iter().zip(results) {
        trajectories.push((*mode, result?));
    }
    if verbose() {
        eprintln!("[mannsim] three modes simulated in {:.2?}", start.elapsed());
    }

    let exp = &experiments[0];
    let spec = settling_spec(exp)?;
    let refs: Vec<(ControlMode, &Trajectory)> =
        trajectories.iter().map(|(m, t)| (*m, t)).collect();
    let table: ComparisonTable = comparison_table(&refs, &spec, &exp.command)?;
    let summary = table.render_text();
    print!("{summary}");

    ensure_out_dir(out_dir)?;
    for (mode, traj) in &trajectories {
        let name = format!("trajectory_{}.csv", mode.as_str().replace('-', "_"));
        output::write_trajectory(&out_dir.join(name), traj)?;
    }
    output::write_comparison(&out_dir.join("comparison.csv"), &table)?;
    output::write_summary(&out_dir.join("summary.txt"), &summary)?;
    println!("wrote comparison outputs to {}", out_dir.display());
    Ok(())
}

pub fn cmd_validate(config_path: &Path) -> Result<(), CliError> {
    let config = load_config(config_path)?;
    let exp = config.build(ControlMode::Mann, None)?;
    let sample_box = vec![(-VALIDATION_BOX, VALIDATION_BOX); exp.system.order()];
    let report = validate_assumption(&exp.system, &sample_box, VALIDATION_SAMPLES, exp.run.seed);
    if let Some(violation) = report.violation {
        return Err(CliError::Failure(format!(
            "gain-bound assumption fails at level {} for x = {:?}: {}",
            violation.level + 1,
            violation.sample,
            violation.detail
        )));
    }
    println!(
        "config ok; gain-bound assumption holds at {} sampled states in [-{}, {}]^{}",
        report.samples_checked,
        VALIDATION_BOX,
        VALIDATION_BOX,
        exp.system.order()
    );
    Ok(())
}
