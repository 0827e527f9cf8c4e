//! Per-agent decision rules.
//!
//! FedExp3 agents mix a softmax exploitation distribution with uniform
//! exploration, build importance-weighted loss estimates from bandit
//! feedback, and average cumulative estimates with their neighbors. The
//! no-communication Exp3 baseline is the same agent with self-weight one.
//! GossipUCB is a confidence-bound baseline that gossips loss sums and pull
//! counts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on probability vectors handed to [`sample_action`].
pub const SIMPLEX_TOL: f64 = 1e-9;
/// Tolerance on gossip weights handed to [`gossip_update`].
pub const WEIGHT_TOL: f64 = 1e-9;
/// Default exploration constant of the GossipUCB index.
pub const GUCB_ALPHA: f64 = 2.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Two => x.log2(),
        }
    }
}

/// Overrides for the theoretical schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleOptions {
    /// Upper clamp on the exploration ratio.
    pub gamma_cap: f64,
    pub log_base: LogBase,
    /// Multiplies the exploration ratio before clamping; the learning rate
    /// is divided by the same factor so `eta = log K / (T gamma_T)` still holds
    /// for the unclamped ratio.
    pub exploration_scale: f64,
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        Self {
            gamma_cap: 1.0,
            log_base: LogBase::Natural,
            exploration_scale: 1.0,
        }
    }
}

/// Exploration and learning-rate schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    pub arms: usize,
    pub horizon: usize,
    /// Consensus constant `C_W`; zero for hand-built schedules.
    pub c_w: f64,
    pub gamma_cap: f64,
    /// `s^3 (C_W + 1/2) K^2 log K`, so that `gamma_t = min(cap, cbrt(coef / t))`.
    pub gamma_coef: f64,
    pub eta: f64,
}

impl Schedule {
    /// `gamma_t = min(cap, cbrt((C_W + 1/2) K^2 log K / t))` and the constant
    /// `eta = cbrt((log K)^2 / ((C_W + 1/2) K^2 T^2))`, with
    /// `C_W = min(2 log T + log N, sqrt N) / (1 - sigma2) + 3`.
    pub fn tuned(
        arms: usize,
        horizon: usize,
        sigma2: f64,
        agents: usize,
        opts: ScheduleOptions,
    ) -> Result<Self> {
        if arms < 2 {
            return Err(Error::InvalidSpec(format!(
                "schedule needs K >= 2, got {arms}"
            )));
        }
        if horizon == 0 || agents == 0 {
            return Err(Error::InvalidSpec(
                "schedule needs T >= 1 and N >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&sigma2) {
            return Err(Error::NonMixing { sigma2 });
        }
        if !(opts.gamma_cap > 0.0 && opts.gamma_cap <= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "gamma_cap {} not in (0, 1]",
                opts.gamma_cap
            )));
        }
        if !(opts.exploration_scale > 0.0 && opts.exploration_scale.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "exploration_scale {} must be positive",
                opts.exploration_scale
            )));
        }
        let log = |x: f64| opts.log_base.log(x);
        let (k, t, n) = (arms as f64, horizon as f64, agents as f64);
        let c_w = (2.0 * log(t) + log(n)).min(n.sqrt()) / (1.0 - sigma2) + 3.0;
        let base = (c_w + 0.5) * k * k * log(k);
        let s = opts.exploration_scale;
        let eta = (log(k).powi(2) / ((c_w + 0.5) * k * k * t * t)).cbrt() / s;
        Ok(Self {
            arms,
            horizon,
            c_w,
            gamma_cap: opts.gamma_cap,
            gamma_coef: s.powi(3) * base,
            eta,
        })
    }

    /// Constant `gamma` and `eta`, with no consensus constant.
    pub fn constant(arms: usize, horizon: usize, gamma: f64, eta: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) || !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "bad constant schedule gamma={gamma} eta={eta}"
            )));
        }
        Ok(Self {
            arms,
            horizon,
            c_w: 0.0,
            gamma_cap: gamma,
            gamma_coef: f64::INFINITY,
            eta,
        })
    }

    /// Exploration ratio at 1-based round `t`.
    pub fn gamma(&self, t: usize) -> f64 {
        (self.gamma_coef / t.max(1) as f64)
            .cbrt()
            .min(self.gamma_cap)
    }

    /// Unclamped formula value at round `t`.
    pub fn gamma_raw(&self, t: usize) -> f64 {
        (self.gamma_coef / t.max(1) as f64).cbrt()
    }

    /// Learning rate at round `t`; constant in `t`.
    pub fn eta(&self, _t: usize) -> f64 {
        self.eta
    }

    /// Bound `(K / gamma_T) C_W` on how far any agent's cumulative estimate
    /// can sit from the network mean.
    pub fn disagreement_bound(&self) -> f64 {
        self.arms as f64 / self.gamma(self.horizon) * self.c_w
    }

    /// First round at which the clamp no longer binds, if within the horizon.
    pub fn first_unclamped_round(&self) -> Option<usize> {
        if !self.gamma_coef.is_finite() {
            return None;
        }
        let t = (self.gamma_coef / self.gamma_cap.powi(3)).ceil() as usize;
        (t <= self.horizon).then_some(t.max(1))
    }
}

/// `p(i) = (1 - gamma) x(i) + gamma / K`.
pub fn action_distribution(x: &[f64], gamma: f64) -> Vec<f64> {
    let mut p = vec![0.0; x.len()];
    action_distribution_into(x, gamma, &mut p);
    p
}

pub fn action_distribution_into(x: &[f64], gamma: f64, out: &mut [f64]) {
    let floor = gamma / x.len() as f64;
    for (p, &xi) in out.iter_mut().zip(x) {
        *p = (1.0 - gamma) * xi + floor;
    }
}

/// Draws an arm from `p` by inversion of one uniform variate.
pub fn sample_action<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> Result<usize> {
    let total: f64 = p.iter().sum();
    if p.is_empty() || (total - 1.0).abs() > SIMPLEX_TOL || p.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::Distribution(format!(
            "sum {total} over {} arms",
            p.len()
        )));
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return Ok(i);
        }
    }
    // u landed in the rounding gap above the last partial sum
    Ok(p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1))
}

/// Importance-weighted estimate: `g(action) = loss / p(action)`, zero elsewhere.
pub fn loss_estimator(observed_loss: f64, action: usize, p: &[f64]) -> Result<Vec<f64>> {
    let mut g = vec![0.0; p.len()];
    loss_estimator_into(observed_loss, action, p, &mut g)?;
    Ok(g)
}

pub fn loss_estimator_into(
    observed_loss: f64,
    action: usize,
    p: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let pa = p[action];
    if !(pa > 0.0) {
        return Err(Error::ZeroProbability { arm: action, p: pa });
    }
    out.fill(0.0);
    out[action] = observed_loss / pa;
    Ok(())
}

/// `z_next = sum_u w_u z_u + g` over the agent itself and its neighbors.
pub fn gossip_update(own_g: &[f64], neighbor_z: &[(f64, &[f64])]) -> Result<Vec<f64>> {
    let sum: f64 = neighbor_z.iter().map(|e| e.0).sum();
    if (sum - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::GossipWeights { sum });
    }
    let mut z = own_g.to_vec();
    for &(w, zu) in neighbor_z {
        for (zi, &x) in z.iter_mut().zip(zu) {
            *zi += w * x;
        }
    }
    Ok(z)
}

/// Softmax of `-eta z`, shifted by `min z` so the largest exponent is zero.
pub fn exploitation_distribution(z: &[f64], eta: f64) -> Vec<f64> {
    let mut x = vec![0.0; z.len()];
    exploitation_distribution_into(z, eta, &mut x);
    x
}

pub fn exploitation_distribution_into(z: &[f64], eta: f64, out: &mut [f64]) {
    let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    for (o, &zi) in out.iter_mut().zip(z) {
        *o = (-eta * (zi - lo)).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

/// State of one FedExp3 (or Exp3) agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    /// Gossiped cumulative loss estimate.
    pub z: Vec<f64>,
    /// Exploitation distribution.
    pub x: Vec<f64>,
    /// Action distribution of the latest round.
    pub p: Vec<f64>,
    pub last_action: Option<usize>,
    /// Loss estimate of the latest round.
    pub g: Vec<f64>,
}

impl AgentState {
    pub fn new(arms: usize) -> Self {
        Self {
            z: vec![0.0; arms],
            x: vec![1.0 / arms as f64; arms],
            p: vec![1.0 / arms as f64; arms],
            last_action: None,
            g: vec![0.0; arms],
        }
    }

    /// Computes `p` from `x` and samples an action.
    pub fn act<R: Rng + ?Sized>(&mut self, gamma: f64, rng: &mut R) -> Result<usize> {
        action_distribution_into(&self.x, gamma, &mut self.p);
        let a = sample_action(&self.p, rng)?;
        self.last_action = Some(a);
        Ok(a)
    }

    /// Builds `g` from the loss of the last action.
    pub fn observe(&mut self, loss: f64) -> Result<()> {
        let a = self
            .last_action
            .ok_or_else(|| Error::Distribution("observe called before act".into()))?;
        loss_estimator_into(loss, a, &self.p, &mut self.g)
    }
}

/// One round of the no-communication Exp3 baseline: the FedExp3 step with
/// self-weight one and no neighbors. `losses` is this agent's loss row for
/// round `t` (1-based). Returns the action played.
pub fn exp3_baseline_step<R: Rng + ?Sized>(
    state: &mut AgentState,
    losses: &[f64],
    schedule: &Schedule,
    t: usize,
    rng: &mut R,
) -> Result<usize> {
    let a = state.act(schedule.gamma(t), rng)?;
    state.observe(losses[a])?;
    let z = gossip_update(&state.g, &[(1.0, &state.z)])?;
    state.z = z;
    exploitation_distribution_into(&state.z, schedule.eta(t), &mut state.x);
    Ok(a)
}

/// GossipUCB agent: gossiped per-arm loss sums and pull counts.
#[derive(Debug, Clone, PartialEq)]
pub struct GucbState {
    pub sums: Vec<f64>,
    pub counts: Vec<f64>,
}

impl GucbState {
    pub fn new(arms: usize) -> Self {
        Self {
            sums: vec![0.0; arms],
            counts: vec![0.0; arms],
        }
    }

    /// Arm to play at 1-based round `t`: a sweep over all arms for the first
    /// `K` rounds, then the lowest lower confidence bound
    /// `mean - sqrt(alpha ln t / count)`, ties to the lowest index.
    pub fn choose(&self, t: usize, alpha: f64) -> usize {
        let k = self.sums.len();
        if t <= k {
            return t - 1;
        }
        let lt = (t as f64).ln();
        let index: Vec<f64> = self
            .sums
            .iter()
            .zip(&self.counts)
            .map(|(&s, &c)| {
                let c = c.max(f64::MIN_POSITIVE);
                s / c - (alpha * lt / c).sqrt()
            })
            .collect();
        crate::env::argmin(&index).0
    }
}

/// Gossips sums and counts from `incoming` (weight, neighbor state) pairs,
/// which include the agent itself, then adds the agent's own pull.
pub fn gucb_update(incoming: &[(f64, &GucbState)], arm: usize, loss: f64) -> Result<GucbState> {
    let sum: f64 = incoming.iter().map(|e| e.0).sum();
    if (sum - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::GossipWeights { sum });
    }
    let k = incoming.first().map_or(0, |e| e.1.sums.len());
    let mut next = GucbState::new(k);
    for &(w, s) in incoming {
        for i in 0..k {
            next.sums[i] += w * s.sums[i];
            next.counts[i] += w * s.counts[i];
        }
    }
    next.sums[arm] += loss;
    next.counts[arm] += 1.0;
    Ok(next)
}

/// Convenience wrapper: choose at round `t`, observe from `losses`, gossip.
pub fn gucb_step(
    state: &GucbState,
    losses: &[f64],
    incoming: &[(f64, &GucbState)],
    t: usize,
    alpha: f64,
) -> Result<(usize, GucbState)> {
    let arm = state.choose(t, alpha);
    Ok((arm, gucb_update(incoming, arm, losses[arm])?))
}
