//! Shared fixtures for the integration and acceptance suites: the benchmark
//! second-order system with its two abrupt-change scenarios.

// Each test target compiles this module separately and uses a subset of it.
#![allow(dead_code)]

use mannsim::controller::{ControlMode, ControllerConfig};
use mannsim::plant::{
    make_example1, CommandSignal, EventKind, LevelSelector, ScenarioEvent, ScenarioScript,
};
use mannsim::simulator::{simulate, RunConfig, Trajectory};

/// Multiplicative changes applied to every level: 20x at t = 5, a further
/// 2x at t = 10, and 1/40 at t = 20 (restoring the original drift exactly).
pub fn scenario1() -> ScenarioScript {
    ScenarioScript::new(
        [(5.0, 20.0), (10.0, 2.0), (20.0, 1.0 / 40.0)]
            .into_iter()
            .map(|(time, coefficient)| ScenarioEvent {
                time,
                selector: LevelSelector::All,
                kind: EventKind::Scale,
                coefficient,
            })
            .collect(),
    )
    .expect("valid scenario")
}

/// Additive changes: the drift offset starts at 0.001 and is replaced by
/// 0.05 at t = 5, 0.1 at t = 10, and 0.001 again at t = 20.
pub fn scenario2() -> ScenarioScript {
    ScenarioScript::new(
        [(0.0, 0.001), (5.0, 0.05), (10.0, 0.1), (20.0, 0.001)]
            .into_iter()
            .map(|(time, coefficient)| ScenarioEvent {
                time,
                selector: LevelSelector::All,
                kind: EventKind::Offset,
                coefficient,
            })
            .collect(),
    )
    .expect("valid scenario")
}

pub fn command() -> CommandSignal {
    CommandSignal::constant(0.1, 2)
}

pub fn run_config(mode: ControlMode) -> RunConfig {
    RunConfig {
        controller: ControllerConfig {
            mode,
            ..Default::default()
        },
        ..Default::default()
    }
}

pub fn simulate_example1(mode: ControlMode, script: &ScenarioScript, horizon: f64) -> Trajectory {
    let run = RunConfig {
        horizon,
        ..run_config(mode)
    };
    simulate(&make_example1(), script, &command(), &run).expect("run stays bounded")
}
