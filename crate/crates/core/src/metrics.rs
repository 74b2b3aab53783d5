//! Settling-time and peak-deviation metrics over per-event windows, plus the
//! mode-comparison table the CLI prints.

use crate::controller::ControlMode;
use crate::error::{Error, Result};
use crate::plant::{CommandSignal, ScenarioScript};
use crate::simulator::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandMode {
    /// Band is band_fraction * |y_d(t)|.
    RelativeToCommand,
    /// Band is band_fraction itself, in output units.
    Absolute,
}

/// Evaluation window of one abrupt change: from its event time to the next
/// event (exclusive) or the horizon (inclusive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start: f64,
    pub end: f64,
    /// Whether a sample exactly at `end` belongs to this window.
    pub closed_end: bool,
}

impl Window {
    fn contains(&self, t: f64) -> bool {
        t >= self.start && (t < self.end || (self.closed_end && t <= self.end))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SettlingSpec {
    /// Fraction defining the band (0.001 = 0.1%).
    pub band_fraction: f64,
    pub band_mode: BandMode,
    /// Per-event evaluation windows.
    pub windows: Vec<Window>,
}

impl SettlingSpec {
    /// Windows derived from the scenario's events: each runs to the next
    /// event or, for the last, to the horizon.
    pub fn for_scenario(
        band_fraction: f64,
        band_mode: BandMode,
        script: &ScenarioScript,
        horizon: f64,
    ) -> Result<Self> {
        if !(band_fraction > 0.0 && band_fraction.is_finite()) {
            return Err(Error::Config(format!(
                "band fraction must be positive, got {band_fraction}"
            )));
        }
        let times: Vec<f64> = script
            .events()
            .iter()
            .map(|e| e.time)
            .filter(|&t| t <= horizon)
            .collect();
        let mut windows = Vec::with_capacity(times.len());
        for (i, &start) in times.iter().enumerate() {
            let (end, closed_end) = match times.get(i + 1) {
                Some(&next) => (next, false),
                None => (horizon, true),
            };
            windows.push(Window {
                start,
                end,
                closed_end,
            });
        }
        Ok(SettlingSpec {
            band_fraction,
            band_mode,
            windows,
        })
    }

    fn window_starting_at(&self, event_t: f64) -> Result<Window> {
        self.windows
            .iter()
            .find(|w| w.start == event_t)
            .copied()
            .ok_or(Error::EmptyWindow { event_time: event_t })
    }

    fn band(&self, command: f64) -> f64 {
        match self.band_mode {
            BandMode::RelativeToCommand => self.band_fraction * command.abs(),
            BandMode::Absolute => self.band_fraction,
        }
    }
}

fn window_sample_range(traj: &Trajectory, window: &Window) -> Result<(usize, usize)> {
    let first = traj.times.iter().position(|&t| window.contains(t));
    let last = traj.times.iter().rposition(|&t| window.contains(t));
    match (first, last) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::EmptyWindow {
            event_time: window.start,
        }),
    }
}

/// Time after the event until the tracking error enters the band and stays
/// inside it for every remaining sample of the window. `None` means the
/// error never settles within the window.
pub fn settling_time(
    traj: &Trajectory,
    event_t: f64,
    spec: &SettlingSpec,
    cmd: &CommandSignal,
) -> Result<Option<f64>> {
    let window = spec.window_starting_at(event_t)?;
    let (first, last) = window_sample_range(traj, &window)?;
    // Scan backward: track the earliest sample from which every later
    // in-window sample stays inside the band.
    let mut settled_from: Option<usize> = None;
    for i in (first..=last).rev() {
        let t = traj.times[i];
        let deviation = (traj.output(i) - cmd.value(t)).abs();
        if deviation <= spec.band(cmd.value(t)) {
            settled_from = Some(i);
        } else {
            break;
        }
    }
    Ok(settled_from.map(|i| traj.times[i] - event_t))
}

/// Largest |y - y_d| over the window.
pub fn peak_deviation(traj: &Trajectory, window: &Window, cmd: &CommandSignal) -> Result<f64> {
    let (first, last) = window_sample_range(traj, window)?;
    let mut peak = 0.0f64;
    for i in first..=last {
        let deviation = (traj.output(i) - cmd.value(traj.times[i])).abs();
        peak = peak.max(deviation);
    }
    Ok(peak)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub mode: ControlMode,
    /// Settling time per event window; `None` when the error never settles.
    pub settling: Vec<Option<f64>>,
    /// Peak deviation per event window.
    pub peaks: Vec<f64>,
}

/// Per-event settling times of every mode, with the memory controller's
/// reduction relative to the memory-free controller.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub event_times: Vec<f64>,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    fn row(&self, mode: ControlMode) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.mode == mode)
    }

    /// (t_nn - t_mann) / t_nn in percent for one event window, when both
    /// settling times exist.
    pub fn reduction_percent(&self, event_idx: usize) -> Option<f64> {
        let nn = self.row(ControlMode::Nn)?.settling.get(event_idx).copied()??;
        let mann = self
            .row(ControlMode::Mann)?
            .settling
            .get(event_idx)
            .copied()??;
        if nn == 0.0 {
            return Some(0.0);
        }
        Some((nn - mann) / nn * 100.0)
    }

    /// Aligned plain-text rendering, settling times in seconds.
    pub fn render_text(&self) -> String {
        let fmt_settle = |s: &Option<f64>| match s {
            Some(v) => format!("{v:.3}"),
            None => "never".to_string(),
        };
        let mut out = String::new();
        out.push_str(&format!("{:<14}", "mode"));
        for t in &self.event_times {
            out.push_str(&format!("{:>12}", format!("t={t}s")));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{:<14}", row.mode.as_str()));
            for s in &row.settling {
                out.push_str(&format!("{:>12}", fmt_settle(s)));
            }
            out.push('\n');
        }
        out.push_str(&format!("{:<14}", "reduction"));
        for idx in 0..self.event_times.len() {
            match self.reduction_percent(idx) {
                Some(p) => out.push_str(&format!("{:>12}", format!("{}%", p.round()))),
                None => out.push_str(&format!("{:>12}", "n/a")),
            }
        }
        out.push('\n');
        out
    }
}

/// Builds the comparison table from one trajectory per mode, all simulated
/// under the same scenario.
pub fn comparison_table(
    trajectories: &[(ControlMode, &Trajectory)],
    spec: &SettlingSpec,
    cmd: &CommandSignal,
) -> Result<ComparisonTable> {
    if !trajectories.iter().any(|(m, _)| *m == ControlMode::Nn)
        || !trajectories.iter().any(|(m, _)| *m == ControlMode::Mann)
    {
        return Err(Error::Config(
            "comparison needs at least the memory-free and memory modes".into(),
        ));
    }
    let event_times: Vec<f64> = spec.windows.iter().map(|w| w.start).collect();
    let mut rows = Vec::with_capacity(trajectories.len());
    for (mode, traj) in trajectories {
        let mut settling = Vec::with_capacity(event_times.len());
        let mut peaks = Vec::with_capacity(event_times.len());
        for window in &spec.windows {
            settling.push(settling_time(traj, window.start, spec, cmd)?);
            peaks.push(peak_deviation(traj, window, cmd)?);
        }
        rows.push(ComparisonRow {
            mode: *mode,
            settling,
            peaks,
        });
    }
    Ok(ComparisonTable { event_times, rows })
}
