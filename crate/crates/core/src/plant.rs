//! Strict-feedback plant model, the known gain bounds, the command signal,
//! and the scenario engine that applies abrupt changes to the drift terms.
//!
//! The plant is the cascade
//! `xdot_i = f_i(x_1..x_i) + g_i(x_1..x_i) * x_{i+1}` (with the control input
//! `u` in place of `x_{n+1}` at the last level). The controller never sees
//! `f_i` or `g_i` directly; it only sees the known bounds `bound_g_i` with
//! their positive floors.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Scalar function of a state prefix `(x_1, .., x_i)`.
pub type StateFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

pub struct Level {
    /// Unknown drift f_i.
    pub drift: StateFn,
    /// Unknown gain g_i.
    pub gain: StateFn,
    /// Known strictly positive bound on |g_i|.
    pub gain_bound: StateFn,
    /// Known constant floor: bound >= |gain| > floor > 0 on the operating region.
    pub gain_floor: f64,
}

pub struct StrictFeedbackSystem {
    levels: Vec<Level>,
}

impl StrictFeedbackSystem {
    pub fn new(levels: Vec<Level>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Config("system must have at least one level".into()));
        }
        for (i, level) in levels.iter().enumerate() {
            if !(level.gain_floor > 0.0 && level.gain_floor.is_finite()) {
                return Err(Error::Config(format!(
                    "gain floor of level {} must be finite and positive",
                    i + 1
                )));
            }
        }
        Ok(StrictFeedbackSystem { levels })
    }

    pub fn order(&self) -> usize {
        self.levels.len()
    }

    /// f_i evaluated on the prefix (x_1..x_{i+1}), level index 0-based.
    pub fn drift(&self, level: usize, prefix: &[f64]) -> f64 {
        (self.levels[level].drift)(prefix)
    }

    pub fn gain(&self, level: usize, prefix: &[f64]) -> f64 {
        (self.levels[level].gain)(prefix)
    }

    pub fn gain_bound(&self, level: usize, prefix: &[f64]) -> f64 {
        (self.levels[level].gain_bound)(prefix)
    }

    pub fn gain_floor(&self, level: usize) -> f64 {
        self.levels[level].gain_floor
    }
}

/// Coefficients of a univariate polynomial in the level's own state x_i,
/// lowest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyLevel {
    pub drift_coeffs: Vec<f64>,
    pub gain_coeffs: Vec<f64>,
    /// Known bound coefficients; defaults to the gain itself when omitted.
    pub gain_bound_coeffs: Option<Vec<f64>>,
    pub gain_floor: f64,
}

fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Builds a strict-feedback system whose f_i and g_i are polynomials in x_i.
pub fn polynomial_system(levels: &[PolyLevel]) -> Result<StrictFeedbackSystem> {
    let mut built = Vec::with_capacity(levels.len());
    for spec in levels {
        for coeffs in [&spec.drift_coeffs, &spec.gain_coeffs]
            .into_iter()
            .chain(spec.gain_bound_coeffs.as_ref())
        {
            if coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::Config("polynomial coefficients must be finite".into()));
            }
        }
        let drift = spec.drift_coeffs.clone();
        let gain = spec.gain_coeffs.clone();
        let bound = spec
            .gain_bound_coeffs
            .clone()
            .unwrap_or_else(|| spec.gain_coeffs.clone());
        built.push(Level {
            drift: Box::new(move |x: &[f64]| poly_eval(&drift, *x.last().unwrap())),
            gain: Box::new(move |x: &[f64]| poly_eval(&gain, *x.last().unwrap())),
            gain_bound: Box::new(move |x: &[f64]| poly_eval(&bound, *x.last().unwrap())),
            gain_floor: spec.gain_floor,
        });
    }
    StrictFeedbackSystem::new(built)
}

/// The second-order benchmark system: f_i(x_i) = 0.1(-x_i/2 + x_i^2),
/// g_i(x_i) = 1 + 0.1 x_i^2, with the bound taken equal to the gain and a
/// floor of 0.5 (g_i >= 1 everywhere, so any floor below 1 is valid).
pub fn make_example1() -> StrictFeedbackSystem {
    let level = || PolyLevel {
        drift_coeffs: vec![0.0, -0.05, 0.1],
        gain_coeffs: vec![1.0, 0.0, 0.1],
        gain_bound_coeffs: None,
        gain_floor: 0.5,
    };
    polynomial_system(&[level(), level()]).expect("example system is valid")
}

/// Which levels an abrupt-change event applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelSelector {
    All,
    /// 0-based level index.
    Index(usize),
}

impl LevelSelector {
    fn matches(&self, level: usize) -> bool {
        match self {
            LevelSelector::All => true,
            LevelSelector::Index(i) => *i == level,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Multiplies the cumulative drift scale.
    Scale,
    /// Replaces the additive drift offset.
    Offset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioEvent {
    pub time: f64,
    pub selector: LevelSelector,
    pub kind: EventKind,
    pub coefficient: f64,
}

/// Ordered list of abrupt changes applied to the unknown drifts.
///
/// Events compose into a per-level `(scale, offset)` pair: scale events
/// multiply the cumulative scale, offset events replace the current offset,
/// and the effective drift is `scale * f_i(x) + offset`. Events take effect
/// from their own timestamp onward (right-continuous).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioScript {
    events: Vec<ScenarioEvent>,
}

impl ScenarioScript {
    pub fn new(events: Vec<ScenarioEvent>) -> Result<Self> {
        for pair in events.windows(2) {
            if pair[1].time <= pair[0].time {
                return Err(Error::Config(format!(
                    "scenario event times must be strictly increasing ({} then {})",
                    pair[0].time, pair[1].time
                )));
            }
        }
        for event in &events {
            if !event.time.is_finite() || !event.coefficient.is_finite() {
                return Err(Error::Config("scenario events must be finite".into()));
            }
            if event.kind == EventKind::Scale && event.coefficient == 0.0 {
                return Err(Error::Config("scale events must have nonzero coefficient".into()));
            }
        }
        Ok(ScenarioScript { events })
    }

    pub fn empty() -> Self {
        ScenarioScript { events: Vec::new() }
    }

    pub fn events(&self) -> &[ScenarioEvent] {
        &self.events
    }

    /// Event times that fall strictly inside (0, horizon); the simulator
    /// splits integration steps at these.
    pub fn boundaries_within(&self, horizon: f64) -> Vec<f64> {
        self.events
            .iter()
            .map(|e| e.time)
            .filter(|&t| t > 0.0 && t < horizon)
            .collect()
    }

    /// Cumulative (scale, offset) acting on level `level` at time `t`.
    pub fn transform_at(&self, level: usize, t: f64) -> (f64, f64) {
        let mut scale = 1.0;
        let mut offset = 0.0;
        for event in self.events.iter().take_while(|e| e.time <= t) {
            if !event.selector.matches(level) {
                continue;
            }
            match event.kind {
                EventKind::Scale => scale *= event.coefficient,
                EventKind::Offset => offset = event.coefficient,
            }
        }
        (scale, offset)
    }
}

/// Drift of one level after applying every scenario event up to time t.
pub fn effective_drift(
    sys: &StrictFeedbackSystem,
    script: &ScenarioScript,
    level: usize,
    t: f64,
    x_prefix: &[f64],
) -> f64 {
    let (scale, offset) = script.transform_at(level, t);
    scale * sys.drift(level, x_prefix) + offset
}

/// Full plant derivative under the scenario-transformed drifts.
pub fn state_derivative(
    sys: &StrictFeedbackSystem,
    script: &ScenarioScript,
    t: f64,
    x: &[f64],
    u: f64,
) -> Result<Vec<f64>> {
    let n = sys.order();
    if x.len() != n {
        return Err(Error::Dimension {
            context: "plant state",
            expected: n,
            actual: x.len(),
        });
    }
    if !u.is_finite() {
        return Err(Error::NonFinite {
            context: "control input".to_string(),
            time: Some(t),
        });
    }
    let mut xdot = Vec::with_capacity(n);
    for i in 0..n {
        let prefix = &x[..=i];
        let next = if i + 1 < n { x[i + 1] } else { u };
        let value = effective_drift(sys, script, i, t, prefix) + sys.gain(i, prefix) * next;
        if !value.is_finite() {
            return Err(Error::NonFinite {
                context: format!("state derivative at level {}", i + 1),
                time: Some(t),
            });
        }
        xdot.push(value);
    }
    Ok(xdot)
}

/// Reference command the plant output must track, supplied together with its
/// time derivatives up to the plant order.
pub struct CommandSignal {
    derivs: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl CommandSignal {
    /// Constant command: value at order 0, zero at every higher order.
    pub fn constant(value: f64, max_order: usize) -> Self {
        let mut derivs: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>> = Vec::new();
        derivs.push(Box::new(move |_| value));
        for _ in 0..max_order {
            derivs.push(Box::new(|_| 0.0));
        }
        CommandSignal { derivs }
    }

    pub fn from_derivatives(derivs: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>>) -> Result<Self> {
        if derivs.is_empty() {
            return Err(Error::Config("command signal needs at least the value itself".into()));
        }
        Ok(CommandSignal { derivs })
    }

    pub fn max_order(&self) -> usize {
        self.derivs.len() - 1
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.derivs[0])(t)
    }

    /// k-th time derivative at t; errors when the order was never supplied.
    pub fn deriv(&self, order: usize, t: f64) -> Result<f64> {
        match self.derivs.get(order) {
            Some(f) => Ok(f(t)),
            None => Err(Error::Config(format!(
                "command derivative of order {order} not available (have up to {})",
                self.max_order()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionViolation {
    pub sample: Vec<f64>,
    pub level: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub passed: bool,
    pub samples_checked: usize,
    pub violation: Option<AssumptionViolation>,
}

/// Samples the box uniformly (seeded) and checks
/// `bound_i > 0`, `bound_i >= |g_i|` and `|g_i| > floor_i` at every sample.
/// Violations are reported, not raised.
pub fn validate_assumption(
    sys: &StrictFeedbackSystem,
    sample_box: &[(f64, f64)],
    n_samples: usize,
    seed: u64,
) -> AssumptionReport {
    assert_eq!(sample_box.len(), sys.order(), "sample box must cover every state");
    assert!(n_samples >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for checked in 0..n_samples {
        let sample: Vec<f64> = sample_box
            .iter()
            .map(|&(lo, hi)| rng.random_range(lo..=hi))
            .collect();
        for level in 0..sys.order() {
            let prefix = &sample[..=level];
            let bound = sys.gain_bound(level, prefix);
            let gain = sys.gain(level, prefix);
            let floor = sys.gain_floor(level);
            let failure = if bound.is_nan() || bound <= 0.0 {
                Some(format!("bound {bound} is not strictly positive"))
            } else if bound < gain.abs() {
                Some(format!("bound {bound} < |gain| {}", gain.abs()))
            } else if gain.abs() <= floor {
                Some(format!("|gain| {} <= floor {floor}", gain.abs()))
            } else {
                None
            };
            if let Some(detail) = failure {
                return AssumptionReport {
                    passed: false,
                    samples_checked: checked + 1,
                    violation: Some(AssumptionViolation {
                        sample,
                        level,
                        detail,
                    }),
                };
            }
        }
    }
    AssumptionReport {
        passed: true,
        samples_checked: n_samples,
        violation: None,
    }
}
