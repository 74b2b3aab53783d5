//! JSON experiment configuration: schema types, strict validation, and the
//! conversion into the library's runtime types. Unknown keys are rejected
//! everywhere, and level indices are 1-based in the file format.

use serde::Deserialize;

use mannsim::controller::{AdaptationRates, ControlMode, ControllerConfig};
use mannsim::plant::{
    make_example1, polynomial_system, CommandSignal, EventKind, LevelSelector, PolyLevel,
    ScenarioEvent, ScenarioScript, StrictFeedbackSystem,
};
use mannsim::metrics::BandMode;
use mannsim::simulator::RunConfig;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub scenario: Vec<EventConfig>,
    pub command: CommandConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub metrics: MetricsSection,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    /// A system registered by name; only "example1" ships.
    Name(String),
    /// Per-level polynomials in the level's own state, lowest degree first.
    Custom(Vec<PolyLevelConfig>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyLevelConfig {
    pub drift: Vec<f64>,
    pub gain: Vec<f64>,
    /// Known bound coefficients; defaults to the gain polynomial.
    #[serde(default)]
    pub gain_bound: Option<Vec<f64>>,
    pub gain_floor: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventConfig {
    pub time: f64,
    /// "all" or a 1-based level number.
    pub level: LevelField,
    pub kind: KindField,
    pub coefficient: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum LevelField {
    Index(usize),
    Tag(String),
}

#[derive(Debug, Deserialize, Clone, Copy)]
#[serde(rename_all = "snake_case")]
pub enum KindField {
    Scale,
    Offset,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CommandConfig {
    Constant(f64),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default = "default_hidden_width")]
    pub hidden_width: usize,
    #[serde(default = "default_memory_slots")]
    pub memory_slots: usize,
    #[serde(default = "default_write_constant")]
    pub write_constant: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            hidden_width: default_hidden_width(),
            memory_slots: default_memory_slots(),
            write_constant: default_write_constant(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    #[serde(default = "default_base_gain")]
    pub base_gain: f64,
    #[serde(default)]
    pub memory_gain: f64,
    #[serde(default)]
    pub leakage: f64,
    #[serde(default = "default_rate")]
    pub w_rate: f64,
    #[serde(default = "default_rate")]
    pub v_rate: f64,
    /// Sets memory_gain = base_gain and leakage = 1/sqrt(base_gain).
    #[serde(default)]
    pub theorem_preset: bool,
    /// Optional per-level rate overrides (1-based levels).
    #[serde(default)]
    pub level_rates: Vec<LevelRatesConfig>,
}

impl Default for ControllerSection {
    fn default() -> Self {
        ControllerSection {
            base_gain: default_base_gain(),
            memory_gain: 0.0,
            leakage: 0.0,
            w_rate: default_rate(),
            v_rate: default_rate(),
            theorem_preset: false,
            level_rates: Vec::new(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelRatesConfig {
    pub level: usize,
    pub w_rate: f64,
    pub v_rate: f64,
    #[serde(default)]
    pub leakage: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_decimation")]
    pub decimation: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub initial_state: Option<Vec<f64>>,
    #[serde(default = "default_blowup_guard")]
    pub blowup_guard: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            step: default_step(),
            horizon: default_horizon(),
            decimation: default_decimation(),
            seed: default_seed(),
            initial_state: None,
            blowup_guard: default_blowup_guard(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    #[serde(default = "default_band_fraction")]
    pub band_fraction: f64,
    #[serde(default)]
    pub band_mode: BandModeField,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection {
            band_fraction: default_band_fraction(),
            band_mode: BandModeField::Relative,
        }
    }
}

#[derive(Debug, Deserialize, Clone, Copy, Default)]
#[serde(rename_all = "snake_case")]
pub enum BandModeField {
    #[default]
    Relative,
    Absolute,
}

fn default_hidden_width() -> usize {
    6
}
fn default_memory_slots() -> usize {
    1
}
fn default_write_constant() -> f64 {
    0.75
}
fn default_base_gain() -> f64 {
    20.0
}
fn default_rate() -> f64 {
    10.0
}
fn default_step() -> f64 {
    1e-3
}
fn default_horizon() -> f64 {
    30.0
}
fn default_decimation() -> usize {
    10
}
fn default_seed() -> u64 {
    3
}
fn default_blowup_guard() -> f64 {
    1e6
}
fn default_band_fraction() -> f64 {
    0.001
}

/// Runtime pieces assembled from a parsed config; the controller mode is
/// chosen per command, not in the file.
pub struct Experiment {
    pub system: StrictFeedbackSystem,
    pub script: ScenarioScript,
    pub command: CommandSignal,
    pub run: RunConfig,
    pub band_fraction: f64,
    pub band_mode: BandMode,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Failure(format!("config parse: {e}")))
    }

    pub fn build(&self, mode: ControlMode, seed_override: Option<u64>) -> Result<Experiment, CliError> {
        let system = match &self.system {
            SystemConfig::Name(name) => match name.as_str() {
                "example1" => make_example1(),
                other => {
                    return Err(CliError::Failure(format!(
                        "unknown system name \"{other}\" (available: example1)"
                    )))
                }
            },
            SystemConfig::Custom(levels) => {
                let poly: Vec<PolyLevel> = levels
                    .iter()
                    .map(|l| PolyLevel {
                        drift_coeffs: l.drift.clone(),
                        gain_coeffs: l.gain.clone(),
                        gain_bound_coeffs: l.gain_bound.clone(),
                        gain_floor: l.gain_floor,
                    })
                    .collect();
                polynomial_system(&poly).map_err(CliError::from)?
            }
        };
        let order = system.order();

        let mut events = Vec::with_capacity(self.scenario.len());
        for event in &self.scenario {
            let selector = match &event.level {
                LevelField::Index(i) => {
                    if *i == 0 || *i > order {
                        return Err(CliError::Failure(format!(
                            "event level {i} out of range 1..={order}"
                        )));
                    }
                    LevelSelector::Index(i - 1)
                }
                LevelField::Tag(tag) if tag == "all" => LevelSelector::All,
                LevelField::Tag(tag) => {
                    return Err(CliError::Failure(format!(
                        "event level must be \"all\" or a level number, got \"{tag}\""
                    )))
                }
            };
            events.push(ScenarioEvent {
                time: event.time,
                selector,
                kind: match event.kind {
                    KindField::Scale => EventKind::Scale,
                    KindField::Offset => EventKind::Offset,
                },
                coefficient: event.coefficient,
            });
        }
        let script = ScenarioScript::new(events).map_err(CliError::from)?;

        let command = match self.command {
            CommandConfig::Constant(value) => CommandSignal::constant(value, order),
        };

        let mut controller = ControllerConfig {
            base_gain: self.controller.base_gain,
            memory_gain: self.controller.memory_gain,
            leakage: self.controller.leakage,
            w_rate: self.controller.w_rate,
            v_rate: self.controller.v_rate,
            mode,
            level_rates: Vec::new(),
        };
        if self.controller.theorem_preset {
            controller.apply_theorem_preset();
        }
        if !self.controller.level_rates.is_empty() {
            let mut overrides = vec![None; order];
            for rates in &self.controller.level_rates {
                if rates.level == 0 || rates.level > order {
                    return Err(CliError::Failure(format!(
                        "level_rates level {} out of range 1..={order}",
                        rates.level
                    )));
                }
                overrides[rates.level - 1] = Some(AdaptationRates {
                    w_rate: rates.w_rate,
                    v_rate: rates.v_rate,
                    leakage: rates.leakage,
                });
            }
            controller.level_rates = overrides;
        }

        let run = RunConfig {
            step: self.run.step,
            horizon: self.run.horizon,
            decimation: self.run.decimation,
            seed: seed_override.unwrap_or(self.run.seed),
            controller,
            hidden_width: self.network.hidden_width,
            memory_slots: self.network.memory_slots,
            write_constant: self.network.write_constant,
            initial_state: self.run.initial_state.clone(),
            blowup_guard: self.run.blowup_guard,
        };
        run.validate(order).map_err(CliError::from)?;

        if !(self.metrics.band_fraction > 0.0 && self.metrics.band_fraction.is_finite()) {
            return Err(CliError::Failure(format!(
                "metrics band_fraction must be positive, got {}",
                self.metrics.band_fraction
            )));
        }

        Ok(Experiment {
            system,
            script,
            command,
            run,
            band_fraction: self.metrics.band_fraction,
            band_mode: match self.metrics.band_mode {
                BandModeField::Relative => BandMode::RelativeToCommand,
                BandModeField::Absolute => BandMode::Absolute,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "system": {"name": "example1"},
        "command": {"constant": 0.1}
    }"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        let exp = cfg.build(ControlMode::Mann, None).unwrap();
        assert_eq!(exp.run.step, 1e-3);
        assert_eq!(exp.run.controller.base_gain, 20.0);
        assert_eq!(exp.run.hidden_width, 6);
        assert_eq!(exp.band_fraction, 0.001);
        assert_eq!(exp.system.order(), 2);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = r#"{
            "system": {"name": "example1"},
            "command": {"constant": 0.1},
            "turbo": true
        }"#;
        assert!(ExperimentConfig::from_json(bad).is_err());
        let bad_nested = r#"{
            "system": {"name": "example1"},
            "command": {"constant": 0.1},
            "run": {"step": 0.001, "warp": 9}
        }"#;
        assert!(ExperimentConfig::from_json(bad_nested).is_err());
    }

    #[test]
    fn bad_step_is_a_config_error() {
        let bad = r#"{
            "system": {"name": "example1"},
            "command": {"constant": 0.1},
            "run": {"step": -0.001}
        }"#;
        let cfg = ExperimentConfig::from_json(bad).unwrap();
        assert!(cfg.build(ControlMode::Mann, None).is_err());
    }

    #[test]
    fn event_levels_are_one_based() {
        let text = r#"{
            "system": {"name": "example1"},
            "command": {"constant": 0.1},
            "scenario": [{"time": 5.0, "level": 1, "kind": "scale", "coefficient": 200.0}]
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let exp = cfg.build(ControlMode::Mann, None).unwrap();
        assert_eq!(
            exp.script.events()[0].selector,
            LevelSelector::Index(0)
        );
        let out_of_range = r#"{
            "system": {"name": "example1"},
            "command": {"constant": 0.1},
            "scenario": [{"time": 5.0, "level": 3, "kind": "scale", "coefficient": 2.0}]
        }"#;
        let cfg = ExperimentConfig::from_json(out_of_range).unwrap();
        assert!(cfg.build(ControlMode::Mann, None).is_err());
    }

    #[test]
    fn out_of_order_events_rejected() {
        let text = r#"{
            "system": {"name": "example1"},
            "command": {"constant": 0.1},
            "scenario": [
                {"time": 10.0, "level": "all", "kind": "scale", "coefficient": 2.0},
                {"time": 5.0, "level": "all", "kind": "scale", "coefficient": 2.0}
            ]
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert!(cfg.build(ControlMode::Mann, None).is_err());
    }

    #[test]
    fn custom_polynomial_system() {
        let text = r#"{
            "system": {"custom": [
                {"drift": [0.0, -0.05, 0.1], "gain": [1.0, 0.0, 0.1], "gain_floor": 0.5}
            ]},
            "command": {"constant": 0.1}
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let exp = cfg.build(ControlMode::Nn, None).unwrap();
        assert_eq!(exp.system.order(), 1);
        assert_eq!(exp.system.gain(0, &[0.0]), 1.0);
    }

    #[test]
    fn seed_override_wins() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        let exp = cfg.build(ControlMode::Mann, Some(99)).unwrap();
        assert_eq!(exp.run.seed, 99);
    }

    #[test]
    fn theorem_preset_applies() {
        let text = r#"{
            "system": {"name": "example1"},
            "command": {"constant": 0.1},
            "controller": {"theorem_preset": true}
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let exp = cfg.build(ControlMode::Mann, None).unwrap();
        assert_eq!(exp.run.controller.memory_gain, 20.0);
        assert!((exp.run.controller.leakage - 1.0 / 20f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn per_level_rates_override() {
        let text = r#"{
            "system": {"name": "example1"},
            "command": {"constant": 0.1},
            "controller": {"level_rates": [{"level": 2, "w_rate": 5.0, "v_rate": 4.0}]}
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let exp = cfg.build(ControlMode::Mann, None).unwrap();
        let level1 = exp.run.controller.rates_for(0);
        assert_eq!(level1.w_rate, 10.0);
        let level2 = exp.run.controller.rates_for(1);
        assert_eq!(level2.w_rate, 5.0);
        assert_eq!(level2.v_rate, 4.0);
    }
}
