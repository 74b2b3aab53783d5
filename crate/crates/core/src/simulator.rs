//! Assembles the joint closed-loop ODE (plant state, every level's network
//! weights, every level's memory matrix), integrates it with fixed RK4 steps
//! split exactly at scenario event times, and records decimated trajectories.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adaptation::weight_derivatives;
use crate::controller::{control_step, true_h, ControlMode, ControllerConfig};
use crate::error::{Error, Result};
use crate::memory::MemoryState;
use crate::nn::{level_input_dims, TwoLayerNn};
use crate::numerics::{rk4_step, Matrix};
use crate::plant::{state_derivative, CommandSignal, ScenarioScript, StrictFeedbackSystem};

/// Everything that evolves during one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopState {
    pub t: f64,
    pub x: Vec<f64>,
    pub nns: Vec<TwoLayerNn>,
    pub mems: Vec<MemoryState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Integration step in seconds.
    pub step: f64,
    /// Simulation horizon in seconds.
    pub horizon: f64,
    /// Record every `decimation`-th integration step.
    pub decimation: usize,
    /// Seed for the network input-weight initialization.
    pub seed: u64,
    pub controller: ControllerConfig,
    /// Hidden width N of every level's network.
    pub hidden_width: usize,
    /// Memory slots per level.
    pub memory_slots: usize,
    /// Memory write constant c_w (forced to zero in frozen mode).
    pub write_constant: f64,
    /// Initial plant state; defaults to the origin.
    pub initial_state: Option<Vec<f64>>,
    /// Any recorded signal beyond this magnitude aborts the run.
    pub blowup_guard: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            step: 1e-3,
            horizon: 30.0,
            decimation: 10,
            seed: 3,
            controller: ControllerConfig::default(),
            hidden_width: 6,
            memory_slots: 1,
            write_constant: 0.75,
            initial_state: None,
            blowup_guard: 1e6,
        }
    }
}

impl RunConfig {
    pub fn validate(&self, order: usize) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("step must be positive, got {}", self.step)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!(
                "horizon must be nonnegative, got {}",
                self.horizon
            )));
        }
        if self.decimation == 0 {
            return Err(Error::Config("decimation must be at least 1".into()));
        }
        if self.hidden_width == 0 || self.memory_slots == 0 {
            return Err(Error::Config("hidden width and memory slots must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.write_constant) {
            return Err(Error::Config(format!(
                "write constant must lie in [0, 1], got {}",
                self.write_constant
            )));
        }
        if !self.blowup_guard.is_finite() || self.blowup_guard <= 0.0 {
            return Err(Error::Config("blow-up guard must be positive".into()));
        }
        if let Some(x0) = &self.initial_state {
            if x0.len() != order {
                return Err(Error::Config(format!(
                    "initial state has {} entries for an order-{order} system",
                    x0.len()
                )));
            }
            if x0.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("initial state must be finite".into()));
            }
        }
        self.controller.validate()
    }

    /// Write constant actually used for this run's memories: the frozen
    /// ablation keeps the memory but stops storing new information.
    pub fn effective_write_constant(&self) -> f64 {
        match self.controller.mode {
            ControlMode::MannFrozen => 0.0,
            _ => self.write_constant,
        }
    }
}

/// Initial closed-loop state: plant at the configured origin, output weights
/// zero, input weights seeded uniform, memories empty.
pub fn init_closed_loop(sys: &StrictFeedbackSystem, run: &RunConfig) -> Result<ClosedLoopState> {
    let n = sys.order();
    run.validate(n)?;
    let dims = level_input_dims(n, run.hidden_width);
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let nns: Vec<TwoLayerNn> = dims
        .iter()
        .map(|&d| TwoLayerNn::seeded(d, run.hidden_width, &mut rng))
        .collect();
    let c_w = run.effective_write_constant();
    let mems = (0..n)
        .map(|_| MemoryState::zeros(run.hidden_width, run.memory_slots, c_w))
        .collect::<Result<Vec<_>>>()?;
    let x = run.initial_state.clone().unwrap_or_else(|| vec![0.0; n]);
    Ok(ClosedLoopState {
        t: 0.0,
        x,
        nns,
        mems,
    })
}

/// Flattens the state into one vector with a fixed documented layout:
/// plant state first, then per level the input weights column by column,
/// the output weights, and the memory slots column by column.
pub fn pack(state: &ClosedLoopState) -> Vec<f64> {
    let mut flat = state.x.clone();
    for (nn, mem) in state.nns.iter().zip(&state.mems) {
        nn.flatten_into(&mut flat);
        flat.extend(mem.mu().to_column_major());
    }
    flat
}

/// Inverse of [`pack`]; the template supplies every dimension and the
/// memory write constants.
pub fn unpack(flat: &[f64], template: &ClosedLoopState) -> Result<ClosedLoopState> {
    let n = template.x.len();
    let expected: usize = n
        + template
            .nns
            .iter()
            .zip(&template.mems)
            .map(|(nn, mem)| nn.flattened_len() + mem.hidden_width() * mem.slots())
            .sum::<usize>();
    if flat.len() != expected {
        return Err(Error::Dimension {
            context: "packed closed-loop state",
            expected,
            actual: flat.len(),
        });
    }
    let mut offset = n;
    let x = flat[..n].to_vec();
    let mut nns = Vec::with_capacity(n);
    let mut mems = Vec::with_capacity(n);
    for (nn_t, mem_t) in template.nns.iter().zip(&template.mems) {
        let w_len = nn_t.flattened_len();
        nns.push(TwoLayerNn::unflatten(
            nn_t.input_dim(),
            nn_t.hidden_width(),
            &flat[offset..offset + w_len],
        )?);
        offset += w_len;
        let mu_len = mem_t.hidden_width() * mem_t.slots();
        let mu = Matrix::from_column_major(
            mem_t.hidden_width(),
            mem_t.slots(),
            &flat[offset..offset + mu_len],
        )?;
        mems.push(MemoryState::from_matrix(mu, mem_t.write_constant())?);
        offset += mu_len;
    }
    Ok(ClosedLoopState {
        t: template.t,
        x,
        nns,
        mems,
    })
}

/// Time derivative of the packed closed-loop state. The scenario transform is
/// evaluated at `scenario_t` while the command uses the actual stage time;
/// the simulator freezes `scenario_t` at each step's start so no RK4 stage
/// ever straddles an abrupt change.
#[allow(clippy::too_many_arguments)]
fn derivative_inner(
    sys: &StrictFeedbackSystem,
    script: &ScenarioScript,
    cmd: &CommandSignal,
    run: &RunConfig,
    template: &ClosedLoopState,
    scenario_t: f64,
    t: f64,
    flat: &[f64],
) -> Result<Vec<f64>> {
    let state = unpack(flat, template)?;
    let out = control_step(sys, &run.controller, t, &state.x, cmd, &state.nns, &state.mems)?;
    let mut deriv = state_derivative(sys, script, scenario_t, &state.x, out.control)?;
    deriv.reserve(flat.len());
    for (k, level) in out.levels.iter().enumerate() {
        let rates = run.controller.rates_for(k);
        let wd = weight_derivatives(&state.nns[k], &level.input, out.errors[k], &rates)?;
        deriv.extend(wd.v_aug.to_column_major());
        deriv.extend(wd.w_aug);
        match run.controller.mode {
            ControlMode::Nn => {
                let mu_len = state.mems[k].hidden_width() * state.mems[k].slots();
                deriv.extend(std::iter::repeat_n(0.0, mu_len));
            }
            ControlMode::Mann | ControlMode::MannFrozen => {
                let mu_dot = state.mems[k].write_derivative_with(
                    &level.weights,
                    &level.query,
                    state.nns[k].w_hidden(),
                    out.errors[k],
                )?;
                deriv.extend(mu_dot.to_column_major());
            }
        }
    }
    Ok(deriv)
}

/// Public derivative of the coupled system at time t (scenario and command
/// both evaluated at t).
pub fn closed_loop_derivative(
    sys: &StrictFeedbackSystem,
    script: &ScenarioScript,
    cmd: &CommandSignal,
    run: &RunConfig,
    t: f64,
    flat: &[f64],
    template: &ClosedLoopState,
) -> Result<Vec<f64>> {
    derivative_inner(sys, script, cmd, run, template, t, t, flat)
}

/// Time-indexed record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Plant state per sample.
    pub states: Vec<Vec<f64>>,
    /// Command value per sample.
    pub command: Vec<f64>,
    /// Tracking errors e_1..e_n per sample.
    pub errors: Vec<Vec<f64>>,
    /// References x_{1,d}..x_{n,d} per sample.
    pub aux_refs: Vec<Vec<f64>>,
    /// Control input per sample.
    pub control: Vec<f64>,
    /// Per-level output-weight norms.
    pub nn_w_norms: Vec<Vec<f64>>,
    /// Per-level input-weight norms.
    pub nn_v_norms: Vec<Vec<f64>>,
    /// Per-level memory norms.
    pub memory_norms: Vec<Vec<f64>>,
    /// Level-1 hidden-layer output per sample.
    pub level1_query: Vec<Vec<f64>>,
    /// Level-1 recall scaled by 1/c_w; absent when the write constant is zero.
    pub level1_recall_scaled: Option<Vec<Vec<f64>>>,
    pub mode: ControlMode,
    /// Effective write constant of the run.
    pub write_constant: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Plant output y = x_1 at sample i.
    pub fn output(&self, i: usize) -> f64 {
        self.states[i][0]
    }
}

/// Runs the closed loop over [0, horizon] with fixed steps split exactly at
/// scenario event times, recording every `decimation`-th step plus the first
/// and last. Any recorded signal beyond the blow-up guard aborts with a
/// divergence diagnostic.
pub fn simulate(
    sys: &StrictFeedbackSystem,
    script: &ScenarioScript,
    cmd: &CommandSignal,
    run: &RunConfig,
) -> Result<Trajectory> {
    let n = sys.order();
    run.validate(n)?;
    if cmd.max_order() < n {
        return Err(Error::Config(format!(
            "command must supply derivatives up to order {n}, has {}",
            cmd.max_order()
        )));
    }
    let state = init_closed_loop(sys, run)?;
    let template = state.clone();
    let mut flat = pack(&state);
    let c_w = run.effective_write_constant();

    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        command: Vec::new(),
        errors: Vec::new(),
        aux_refs: Vec::new(),
        control: Vec::new(),
        nn_w_norms: Vec::new(),
        nn_v_norms: Vec::new(),
        memory_norms: Vec::new(),
        level1_query: Vec::new(),
        level1_recall_scaled: if c_w > 0.0 { Some(Vec::new()) } else { None },
        mode: run.controller.mode,
        write_constant: c_w,
    };

    let record = |t: f64, flat: &[f64], traj: &mut Trajectory| -> Result<()> {
        let state = unpack(flat, &template)?;
        let out = control_step(sys, &run.controller, t, &state.x, cmd, &state.nns, &state.mems)?;
        let guard = run.blowup_guard;
        let check = |name: &str, value: f64| -> Result<()> {
            if !value.is_finite() || value.abs() > guard {
                Err(Error::Divergence {
                    time: t,
                    quantity: name.to_string(),
                    value,
                })
            } else {
                Ok(())
            }
        };
        for (i, &xi) in state.x.iter().enumerate() {
            check(&format!("x{}", i + 1), xi)?;
        }
        check("u", out.control)?;
        let mut w_norms = Vec::with_capacity(n);
        let mut v_norms = Vec::with_capacity(n);
        let mut mu_norms = Vec::with_capacity(n);
        for k in 0..n {
            let w = state.nns[k].w_norm();
            let v = state.nns[k].v_norm();
            let m = state.mems[k].mu_norm();
            check(&format!("w_norm{}", k + 1), w)?;
            check(&format!("v_norm{}", k + 1), v)?;
            check(&format!("mu_norm{}", k + 1), m)?;
            w_norms.push(w);
            v_norms.push(v);
            mu_norms.push(m);
        }
        traj.times.push(t);
        traj.command.push(cmd.value(t));
        traj.states.push(state.x);
        traj.errors.push(out.errors);
        traj.aux_refs.push(out.aux_refs);
        traj.control.push(out.control);
        traj.nn_w_norms.push(w_norms);
        traj.nn_v_norms.push(v_norms);
        traj.memory_norms.push(mu_norms);
        traj.level1_query.push(out.levels[0].query.clone());
        if let Some(recalls) = traj.level1_recall_scaled.as_mut() {
            recalls.push(out.levels[0].recalled.iter().map(|r| r / c_w).collect());
        }
        Ok(())
    };

    record(0.0, &flat, &mut traj)?;

    let horizon = run.horizon;
    let tol = run.step * 1e-6;
    let mut boundaries = script.boundaries_within(horizon);
    boundaries.push(horizon);
    let mut t = 0.0;
    let mut step_idx = 0usize;

    for boundary in boundaries {
        while t < boundary - tol {
            let h = run.step.min(boundary - t);
            let scenario_t = t;
            flat = rk4_step(
                |ts, s| derivative_inner(sys, script, cmd, run, &template, scenario_t, ts, s),
                t,
                &flat,
                h,
            )?;
            let next = t + h;
            t = if boundary - next < tol { boundary } else { next };
            step_idx += 1;
            if step_idx.is_multiple_of(run.decimation) {
                record(t, &flat, &mut traj)?;
            }
        }
        t = boundary;
    }

    if traj.times.last().copied() != Some(horizon) && horizon > 0.0 {
        record(horizon, &flat, &mut traj)?;
    }
    Ok(traj)
}

/// Diagnostic series of the true function each level's network approximates,
/// with the trajectory derivatives estimated by finite differences of the
/// recorded samples (central in the interior, one-sided at the ends).
pub fn true_h_series(
    sys: &StrictFeedbackSystem,
    traj: &Trajectory,
    level: usize,
) -> Result<Vec<(f64, f64)>> {
    let len = traj.len();
    if len < 2 {
        return Err(Error::Config(
            "true-h series needs at least two trajectory samples".into(),
        ));
    }
    let fd = |values: &dyn Fn(usize) -> f64, i: usize| -> f64 {
        if i == 0 {
            (values(1) - values(0)) / (traj.times[1] - traj.times[0])
        } else if i == len - 1 {
            (values(len - 1) - values(len - 2)) / (traj.times[len - 1] - traj.times[len - 2])
        } else {
            (values(i + 1) - values(i - 1)) / (traj.times[i + 1] - traj.times[i - 1])
        }
    };
    let mut series = Vec::with_capacity(len);
    for i in 0..len {
        let prev_state_dot = if level > 0 {
            fd(&|j| traj.states[j][level - 1], i)
        } else {
            0.0
        };
        let aux_ref_dot = fd(&|j| traj.aux_refs[j][level], i);
        let h = true_h(
            sys,
            level,
            &traj.states[i],
            traj.errors[i][level],
            traj.aux_refs[i][level],
            prev_state_dot,
            aux_ref_dot,
        )?;
        series.push((traj.times[i], h));
    }
    Ok(series)
}
