//! Backstepping control chain: tracking errors, state-dependent gains,
//! auxiliary references for each level, and the final control input. Each
//! level's unknown dynamics are covered by a two-layer network whose output
//! is modified by its working memory.
//!
//! Levels are indexed 0-based throughout; level k tracks the auxiliary
//! reference produced by level k-1 (level 0 tracks the command itself).

use crate::error::{Error, Result};
use crate::memory::MemoryState;
use crate::nn::{assemble_input, TwoLayerNn};
use crate::numerics::{dot, quad01, QuadWeight};
use crate::plant::{CommandSignal, StrictFeedbackSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlMode {
    /// Full controller: memory is read and continuously written.
    Mann,
    /// Memory disabled entirely; the recall term is forced to zero.
    Nn,
    /// Memory is read and its forget/error channels stay active, but the
    /// write constant is zero, so no new information is stored.
    MannFrozen,
}

impl ControlMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControlMode::Mann => "mann",
            ControlMode::Nn => "nn",
            ControlMode::MannFrozen => "mann-frozen",
        }
    }
}

/// Learning rates and leakage of one level's update law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptationRates {
    /// C_w: output-weight learning rate.
    pub w_rate: f64,
    /// C_v: input-weight learning rate.
    pub v_rate: f64,
    /// kappa: sigma-modification leakage.
    pub leakage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    /// K: base control gain.
    pub base_gain: f64,
    /// k_z: coefficient of the |W| |mu| gain term.
    pub memory_gain: f64,
    /// kappa: sigma-modification rate (uniform default).
    pub leakage: f64,
    /// C_w (uniform default).
    pub w_rate: f64,
    /// C_v (uniform default).
    pub v_rate: f64,
    pub mode: ControlMode,
    /// Optional per-level overrides of the adaptation rates.
    pub level_rates: Vec<Option<AdaptationRates>>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            base_gain: 20.0,
            memory_gain: 0.0,
            leakage: 0.0,
            w_rate: 10.0,
            v_rate: 10.0,
            mode: ControlMode::Mann,
            level_rates: Vec::new(),
        }
    }
}

impl ControllerConfig {
    /// Gain prescription under which the boundedness analysis of the closed
    /// loop goes through: k_z = K, kappa = 1/sqrt(K).
    pub fn apply_theorem_preset(&mut self) {
        self.memory_gain = self.base_gain;
        self.leakage = 1.0 / self.base_gain.sqrt();
    }

    pub fn rates_for(&self, level: usize) -> AdaptationRates {
        self.level_rates
            .get(level)
            .and_then(|r| *r)
            .unwrap_or(AdaptationRates {
                w_rate: self.w_rate,
                v_rate: self.v_rate,
                leakage: self.leakage,
            })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_gain > 0.0 && self.base_gain.is_finite()) {
            return Err(Error::Config("base gain must be positive".into()));
        }
        if !(self.memory_gain >= 0.0 && self.memory_gain.is_finite()) {
            return Err(Error::Config("memory gain must be nonnegative".into()));
        }
        let mut rate_sets = vec![self.rates_for(usize::MAX)];
        rate_sets.extend(self.level_rates.iter().filter_map(|r| *r));
        for rates in rate_sets {
            if !(rates.w_rate > 0.0 && rates.v_rate > 0.0) {
                return Err(Error::Config("learning rates must be positive".into()));
            }
            if !(rates.leakage >= 0.0 && rates.leakage.is_finite()) {
                return Err(Error::Config("leakage must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

/// Everything one level contributes beyond the recursion itself, kept for
/// trajectory recording.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelDiagnostics {
    /// State-dependent gain K_k.
    pub gain: f64,
    /// Network approximation h_hat_k.
    pub h_hat: f64,
    /// Memory recall M_r (zero in memory-free mode).
    pub recalled: Vec<f64>,
    /// Hidden-layer output used as query and write vector.
    pub query: Vec<f64>,
    /// Softmax addressing weights (empty in memory-free mode).
    pub weights: Vec<f64>,
    /// Assembled network input for this level.
    pub input: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlStepOutput {
    /// Tracking errors e_1..e_n.
    pub errors: Vec<f64>,
    /// References x_{1,d}..x_{n,d}; the first is the command value.
    pub aux_refs: Vec<f64>,
    /// Final plant input u.
    pub control: f64,
    pub levels: Vec<LevelDiagnostics>,
}

/// State-dependent gain of one level:
/// `K (1 + int_0^1 theta bound(prefix, theta e + x_d) dtheta)
///  + k_z |W|_F |mu|_F + K (|x_e|^2 |W^T sigma'|^2 + |sigma' V^T x_e|^2)`.
///
/// The quadrature always uses the known bound (the true gain is unknown to
/// the controller), and the first norm term is the squared Frobenius norm of
/// the outer product of x_e with the row W^T sigma'.
#[allow(clippy::too_many_arguments)]
pub fn gain(
    sys: &StrictFeedbackSystem,
    cfg: &ControllerConfig,
    level: usize,
    error: f64,
    aux_ref: f64,
    x_prefix: &[f64],
    x_tilde: &[f64],
    nn: &TwoLayerNn,
    mem: Option<&MemoryState>,
) -> Result<f64> {
    if x_prefix.len() != level {
        return Err(Error::Dimension {
            context: "gain state prefix",
            expected: level,
            actual: x_prefix.len(),
        });
    }
    let mut point = x_prefix.to_vec();
    point.push(0.0);
    let bound_integral = quad01(
        |theta| {
            *point.last_mut().unwrap() = theta * error + aux_ref;
            sys.gain_bound(level, &point)
        },
        QuadWeight::Theta,
    )?;

    let x_e = nn.extended_input(x_tilde)?;
    let sigma_p = nn.sigma_prime(x_tilde)?;
    // W^T sigma': a length-N row vector.
    let w_sigma_p = sigma_p.tr_matvec(nn.w_aug())?;
    let outer_sq = dot(&x_e, &x_e) * dot(&w_sigma_p, &w_sigma_p);
    // sigma' V^T x_e: a length-(N+1) vector.
    let v_x = nn.preactivation(x_tilde)?;
    let sv = sigma_p.matvec(&v_x)?;
    let vec_sq = dot(&sv, &sv);

    let memory_term = match mem {
        Some(m) => cfg.memory_gain * nn.w_norm() * m.mu_norm(),
        None => 0.0,
    };

    let k = cfg.base_gain * (1.0 + bound_integral)
        + memory_term
        + cfg.base_gain * (outer_sq + vec_sq);
    if !k.is_finite() {
        return Err(Error::NonFinite {
            context: format!("gain at level {}", level + 1),
            time: None,
        });
    }
    Ok(k)
}

/// One pass of the backstepping recursion at the current state, weights and
/// memory contents. Memory behavior follows the mode: the full controller
/// reads live memory, the memory-free controller forces the recall to zero
/// and never touches memory state.
pub fn control_step(
    sys: &StrictFeedbackSystem,
    cfg: &ControllerConfig,
    t: f64,
    x: &[f64],
    cmd: &CommandSignal,
    nns: &[TwoLayerNn],
    mems: &[MemoryState],
) -> Result<ControlStepOutput> {
    let n = sys.order();
    if x.len() != n {
        return Err(Error::Dimension {
            context: "control step state",
            expected: n,
            actual: x.len(),
        });
    }
    if nns.len() != n {
        return Err(Error::Dimension {
            context: "per-level networks",
            expected: n,
            actual: nns.len(),
        });
    }
    if cfg.mode != ControlMode::Nn && mems.len() != n {
        return Err(Error::Dimension {
            context: "per-level memories",
            expected: n,
            actual: mems.len(),
        });
    }

    let mut errors = vec![0.0; n];
    let mut aux_refs = vec![0.0; n];
    let mut levels = Vec::with_capacity(n);
    aux_refs[0] = cmd.value(t);
    errors[0] = x[0] - aux_refs[0];
    let mut control = 0.0;

    for k in 0..n {
        let x_tilde = assemble_input(k, x, cmd, t, &nns[..k])?;
        let query = nns[k].hidden(&x_tilde)?;
        let (recalled, weights, mem_ref) = match cfg.mode {
            ControlMode::Nn => (vec![0.0; nns[k].hidden_width()], Vec::new(), None),
            ControlMode::Mann | ControlMode::MannFrozen => {
                let read = mems[k].read(&query)?;
                (read.recalled, read.weights, Some(&mems[k]))
            }
        };
        let h_hat = nns[k].approximate_h(&x_tilde, &recalled)?;
        let gain_k = gain(
            sys,
            cfg,
            k,
            errors[k],
            aux_refs[k],
            &x[..k],
            &x_tilde,
            &nns[k],
            mem_ref,
        )?;

        let bound = sys.gain_bound(k, &x[..=k]);
        let floor = sys.gain_floor(k);
        if !bound.is_finite() || bound <= floor {
            return Err(Error::Assumption {
                level: k,
                time: t,
                bound,
                floor,
            });
        }
        let cross = if k > 0 {
            sys.gain_bound(k - 1, &x[..k]) * errors[k - 1]
        } else {
            0.0
        };
        let value = (-gain_k * errors[k] - cross - h_hat) / bound;
        if !value.is_finite() {
            return Err(Error::NonFinite {
                context: format!("control recursion at level {}", k + 1),
                time: Some(t),
            });
        }
        if k + 1 < n {
            aux_refs[k + 1] = value;
            errors[k + 1] = x[k + 1] - value;
        } else {
            control = value;
        }
        levels.push(LevelDiagnostics {
            gain: gain_k,
            h_hat,
            recalled,
            query,
            weights,
            input: x_tilde,
        });
    }

    Ok(ControlStepOutput {
        errors,
        aux_refs,
        control,
        levels,
    })
}

/// The analytically ideal first-order control, which requires the true
/// drift and gain. Only meaningful as a testing oracle: with it the
/// first-order closed loop tracks the command asymptotically.
pub fn ideal_first_order_control(
    sys: &StrictFeedbackSystem,
    t: f64,
    x1: f64,
    cmd: &CommandSignal,
    base_gain: f64,
) -> Result<f64> {
    let y_d = cmd.value(t);
    let y_d_dot = cmd.deriv(1, t)?;
    let e1 = x1 - y_d;
    let beta = |v: f64| sys.gain_bound(0, &[v]) / sys.gain(0, &[v]);
    let h1 = beta(x1) * sys.drift(0, &[x1])
        - y_d_dot * quad01(|theta| beta(theta * e1 + y_d), QuadWeight::Plain)?;
    let u = (-base_gain * e1 - h1) / sys.gain_bound(0, &[x1]);
    if !u.is_finite() {
        return Err(Error::NonFinite {
            context: "ideal first-order control".to_string(),
            time: Some(t),
        });
    }
    Ok(u)
}

/// Diagnostic evaluation of the true function each level's network
/// approximates. Requires the true system; the trajectory derivatives
/// (of the previous state and of this level's reference) are supplied by
/// the caller, typically from finite differences of a recorded run.
pub fn true_h(
    sys: &StrictFeedbackSystem,
    level: usize,
    x: &[f64],
    error: f64,
    aux_ref: f64,
    prev_state_dot: f64,
    aux_ref_dot: f64,
) -> Result<f64> {
    if x.len() <= level {
        return Err(Error::Dimension {
            context: "true-h state",
            expected: level + 1,
            actual: x.len(),
        });
    }
    let beta_at = |point: &[f64]| sys.gain_bound(level, point) / sys.gain(level, point);
    let prefix = &x[..=level];
    let mut point = x[..level].to_vec();
    point.push(0.0);

    let mut h = beta_at(prefix) * sys.drift(level, prefix);

    if level > 0 {
        // theta-weighted integral of d(beta)/d(previous state coordinate),
        // by central differences on the last prefix coordinate.
        let fd_step = 1e-5;
        let dbeta = quad01(
            |theta| {
                point[level] = theta * error + aux_ref;
                let saved = point[level - 1];
                point[level - 1] = saved + fd_step;
                let plus = beta_at(&point);
                point[level - 1] = saved - fd_step;
                let minus = beta_at(&point);
                point[level - 1] = saved;
                (plus - minus) / (2.0 * fd_step)
            },
            QuadWeight::Theta,
        )?;
        h += error * prev_state_dot * dbeta;
    }

    let beta_integral = quad01(
        |theta| {
            point[level] = theta * error + aux_ref;
            beta_at(&point)
        },
        QuadWeight::Plain,
    )?;
    h -= aux_ref_dot * beta_integral;

    if !h.is_finite() {
        return Err(Error::NonFinite {
            context: format!("true h at level {}", level + 1),
            time: None,
        });
    }
    Ok(h)
}
