//! Synchronous round simulation, regret accounting and run aggregation.
//!
//! A round is sample, observe, gossip, update. Gossip reads the cumulative
//! estimates of the previous round from an immutable snapshot and writes
//! into a second buffer, so the order in which agents are processed never
//! matters. Every agent draws from its own ChaCha stream.

use std::str::FromStr;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{
    exploitation_distribution_into, AgentState, GucbState, Schedule, ScheduleOptions, GUCB_ALPHA,
};
use crate::env::{
    argmin, make_activated_bernoulli, make_constant, mean_over_agents, ActivatedBernoulliSpec,
    LossTensor,
};
use crate::error::{Error, Result};
use crate::gossip::GossipMatrix;
use crate::graph::Graph;
use crate::par::{try_for_each_mut, try_for_each_zip_mut, try_map, Execution};
use crate::stats;

const ENV_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    FedExp3,
    Exp3,
    Gucb,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::FedExp3 => "fedexp3",
            Algorithm::Exp3 => "exp3",
            Algorithm::Gucb => "gucb",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fedexp3" => Ok(Algorithm::FedExp3),
            "exp3" => Ok(Algorithm::Exp3),
            "gucb" => Ok(Algorithm::Gucb),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// What an agent is charged each round.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegretMode {
    /// Network-average loss of the arm actually played.
    #[default]
    Realized,
    /// `<p_t, mean loss>`; lower variance, same expectation.
    Expected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvSeed {
    /// Same tensor for every run.
    Fixed(u64),
    /// Fresh tensor per run, seeded from the run seed.
    PerRun,
}

#[derive(Clone)]
pub enum EnvironmentSpec {
    ActivatedBernoulli { seed: EnvSeed },
    Constant { value: f64 },
    Tensor(Arc<dyn LossTensor>),
}

impl std::fmt::Debug for EnvironmentSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EnvironmentSpec::ActivatedBernoulli { seed } => {
                write!(f, "ActivatedBernoulli({seed:?})")
            }
            EnvironmentSpec::Constant { value } => write!(f, "Constant({value})"),
            EnvironmentSpec::Tensor(t) => write!(
                f,
                "Tensor(T={}, N={}, K={})",
                t.horizon(),
                t.agent_count(),
                t.arm_count()
            ),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub graph: Graph,
    pub gossip: GossipMatrix,
    pub environment: EnvironmentSpec,
    pub algorithm: Algorithm,
    pub arms: usize,
    pub horizon: usize,
    pub runs: usize,
    pub seed: u64,
    pub schedule: ScheduleOptions,
    pub gucb_alpha: f64,
    pub regret_mode: RegretMode,
    /// Collect per-round consensus diagnostics (FedExp3 and Exp3 only).
    pub diagnostics: bool,
    /// Keep the full action log and per-agent regret series.
    pub record_actions: bool,
    pub execution: Execution,
}

impl SimConfig {
    /// Config with the max-degree gossip matrix of `graph` and defaults
    /// elsewhere: one run, seed 0, realized regret, no diagnostics.
    pub fn new(
        graph: Graph,
        environment: EnvironmentSpec,
        algorithm: Algorithm,
        arms: usize,
        horizon: usize,
    ) -> Result<Self> {
        let gossip = GossipMatrix::max_degree(&graph)?;
        Ok(Self {
            graph,
            gossip,
            environment,
            algorithm,
            arms,
            horizon,
            runs: 1,
            seed: 0,
            schedule: ScheduleOptions::default(),
            gucb_alpha: GUCB_ALPHA,
            regret_mode: RegretMode::Realized,
            diagnostics: false,
            record_actions: false,
            execution: Execution::default(),
        })
    }

    pub fn agent_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.agent_count();
        if self.horizon == 0 || self.runs == 0 || self.arms == 0 {
            return Err(Error::Config(format!(
                "horizon, runs and arms must be positive (T={}, runs={}, K={})",
                self.horizon, self.runs, self.arms
            )));
        }
        if self.gossip.size() != n {
            return Err(Error::Config(format!(
                "gossip matrix is {0}x{0} but the graph has {n} nodes",
                self.gossip.size()
            )));
        }
        for u in 0..n {
            if let Some(&(v, _)) = self
                .gossip
                .row(u)
                .iter()
                .find(|&&(v, _)| v != u && !self.graph.has_edge(u, v))
            {
                return Err(Error::Config(format!(
                    "gossip weight on non-edge ({u}, {v})"
                )));
            }
        }
        if let EnvironmentSpec::Tensor(t) = &self.environment {
            if t.agent_count() != n {
                return Err(Error::Config(format!(
                    "environment has {} agents but the graph has {n} nodes",
                    t.agent_count()
                )));
            }
            if t.arm_count() != self.arms {
                return Err(Error::Config(format!(
                    "environment has {} arms but agents expect {}",
                    t.arm_count(),
                    self.arms
                )));
            }
            if t.horizon() < self.horizon {
                return Err(Error::Config(format!(
                    "environment horizon {} shorter than {}",
                    t.horizon(),
                    self.horizon
                )));
            }
        }
        if self.algorithm == Algorithm::Gucb && !(self.gucb_alpha > 0.0) {
            return Err(Error::Config(format!(
                "gucb_alpha must be positive, got {}",
                self.gucb_alpha
            )));
        }
        self.schedule_for().map(|_| ())
    }

    /// The schedule FedExp3 or Exp3 agents run with; `None` for GUCB.
    pub fn schedule_for(&self) -> Result<Option<Schedule>> {
        let (sigma2, agents) = match self.algorithm {
            Algorithm::Gucb => return Ok(None),
            Algorithm::FedExp3 => (self.gossip.second_singular_value(), self.agent_count()),
            Algorithm::Exp3 => (0.0, 1),
        };
        if self.arms == 1 {
            // a single arm leaves nothing to learn
            return Schedule::constant(1, self.horizon, 1.0, 0.0).map(Some);
        }
        Schedule::tuned(self.arms, self.horizon, sigma2, agents, self.schedule).map(Some)
    }

    /// The seed of the tensor used by a run with seed `run_seed`, if generated.
    pub fn environment_seed(&self, run_seed: u64) -> Option<u64> {
        match self.environment {
            EnvironmentSpec::ActivatedBernoulli {
                seed: EnvSeed::Fixed(s),
            } => Some(s),
            EnvironmentSpec::ActivatedBernoulli {
                seed: EnvSeed::PerRun,
            } => Some(derive_seed(run_seed, ENV_STREAM)),
            _ => None,
        }
    }

    pub fn build_environment(&self, run_seed: u64) -> Result<Arc<dyn LossTensor>> {
        let n = self.agent_count();
        Ok(match &self.environment {
            EnvironmentSpec::ActivatedBernoulli { .. } => {
                Arc::new(make_activated_bernoulli(ActivatedBernoulliSpec {
                    horizon: self.horizon,
                    agent_count: n,
                    arm_count: self.arms,
                    seed: self.environment_seed(run_seed).unwrap_or_default(),
                })?)
            }
            EnvironmentSpec::Constant { value } => {
                Arc::new(make_constant(self.horizon, n, self.arms, *value)?)
            }
            EnvironmentSpec::Tensor(t) => Arc::clone(t),
        })
    }
}

/// Independent 64-bit seed number `stream` derived from `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Seed of run `r` under master seed `master`.
pub fn run_seed(master: u64, r: usize) -> u64 {
    derive_seed(master, r as u64)
}

fn agent_rngs(seed: u64, n: usize) -> Vec<ChaCha8Rng> {
    (0..n)
        .map(|v| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(v as u64);
            rng
        })
        .collect()
}

/// A network of FedExp3 agents, stepped one round at a time.
#[derive(Debug, Clone)]
pub struct Exp3Network {
    gossip: GossipMatrix,
    schedule: Schedule,
    agents: Vec<AgentState>,
    rngs: Vec<ChaCha8Rng>,
    z_next: Vec<Vec<f64>>,
    round: usize,
    exec: Execution,
}

impl Exp3Network {
    pub fn new(gossip: GossipMatrix, schedule: Schedule, seed: u64, exec: Execution) -> Self {
        let n = gossip.size();
        let k = schedule.arms;
        Self {
            gossip,
            agents: vec![AgentState::new(k); n],
            rngs: agent_rngs(seed, n),
            z_next: vec![vec![0.0; k]; n],
            round: 0,
            exec: exec.for_agents(n),
            schedule,
        }
    }

    /// Plays one round against `losses` (`N x K`, row-major by agent).
    pub fn step(&mut self, losses: &[f64]) -> Result<()> {
        let t = self.round + 1;
        let (gamma, eta) = (self.schedule.gamma(t), self.schedule.eta(t));
        let k = self.schedule.arms;
        try_for_each_zip_mut(self.exec, &mut self.agents, &mut self.rngs, |v, st, rng| {
            let a = st.act(gamma, rng)?;
            st.observe(losses[v * k + a])
        })?;
        let agents = &self.agents;
        let gossip = &self.gossip;
        try_for_each_mut(self.exec, &mut self.z_next, |v, zn| {
            gossip_into(zn, &agents[v].g, gossip.incoming(v), agents);
            Ok(())
        })?;
        try_for_each_zip_mut(
            self.exec,
            &mut self.agents,
            &mut self.z_next,
            |_, st, zn| {
                std::mem::swap(&mut st.z, zn);
                exploitation_distribution_into(&st.z, eta, &mut st.x);
                Ok(())
            },
        )?;
        self.round = t;
        Ok(())
    }

    /// Same as [`step`](Self::step) but visits agents in `order` within each
    /// phase, sequentially.
    pub fn step_in_order(&mut self, losses: &[f64], order: &[usize]) -> Result<()> {
        let t = self.round + 1;
        let (gamma, eta) = (self.schedule.gamma(t), self.schedule.eta(t));
        let k = self.schedule.arms;
        for &v in order {
            let a = self.agents[v].act(gamma, &mut self.rngs[v])?;
            self.agents[v].observe(losses[v * k + a])?;
        }
        for &v in order {
            let mut zn = std::mem::take(&mut self.z_next[v]);
            gossip_into(
                &mut zn,
                &self.agents[v].g,
                self.gossip.incoming(v),
                &self.agents,
            );
            self.z_next[v] = zn;
        }
        for &v in order {
            std::mem::swap(&mut self.agents[v].z, &mut self.z_next[v]);
            let st = &mut self.agents[v];
            exploitation_distribution_into(&st.z, eta, &mut st.x);
        }
        self.round = t;
        Ok(())
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn agent(&self, v: usize) -> &AgentState {
        &self.agents[v]
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    /// Rounds played so far.
    pub fn round(&self) -> usize {
        self.round
    }

    /// Network mean of the cumulative estimates.
    pub fn mean_z(&self) -> Vec<f64> {
        mean_of(
            self.agents.iter().map(|a| a.z.as_slice()),
            self.schedule.arms,
        )
    }

    /// Network mean of the latest loss estimates.
    pub fn mean_g(&self) -> Vec<f64> {
        mean_of(
            self.agents.iter().map(|a| a.g.as_slice()),
            self.schedule.arms,
        )
    }
}

fn gossip_into(out: &mut Vec<f64>, g: &[f64], incoming: &[(usize, f64)], agents: &[AgentState]) {
    out.clear();
    out.extend_from_slice(g);
    for &(u, w) in incoming {
        for (o, &zu) in out.iter_mut().zip(&agents[u].z) {
            *o += w * zu;
        }
    }
}

fn mean_of<'a>(rows: impl Iterator<Item = &'a [f64]>, k: usize) -> Vec<f64> {
    let mut mean = vec![0.0; k];
    let mut n = 0usize;
    for row in rows {
        n += 1;
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    mean
}

/// A network of GossipUCB agents.
#[derive(Debug, Clone)]
pub struct GucbNetwork {
    gossip: GossipMatrix,
    alpha: f64,
    states: Vec<GucbState>,
    actions: Vec<usize>,
    round: usize,
}

impl GucbNetwork {
    pub fn new(gossip: GossipMatrix, arms: usize, alpha: f64) -> Self {
        let n = gossip.size();
        Self {
            gossip,
            alpha,
            states: vec![GucbState::new(arms); n],
            actions: vec![0; n],
            round: 0,
        }
    }

    pub fn step(&mut self, losses: &[f64]) -> Result<()> {
        let t = self.round + 1;
        let k = self.states.first().map_or(0, |s| s.sums.len());
        for (a, st) in self.actions.iter_mut().zip(&self.states) {
            *a = st.choose(t, self.alpha);
        }
        let next = (0..self.states.len())
            .map(|v| {
                let incoming: Vec<(f64, &GucbState)> = self
                    .gossip
                    .incoming(v)
                    .iter()
                    .map(|&(u, w)| (w, &self.states[u]))
                    .collect();
                let a = self.actions[v];
                crate::agents::gucb_update(&incoming, a, losses[v * k + a])
            })
            .collect::<Result<Vec<_>>>()?;
        self.states = next;
        self.round = t;
        Ok(())
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn states(&self) -> &[GucbState] {
        &self.states
    }
}

enum Policy {
    Exp3(Box<Exp3Network>),
    Gucb(GucbNetwork),
}

impl Policy {
    fn step(&mut self, losses: &[f64]) -> Result<()> {
        match self {
            Policy::Exp3(n) => n.step(losses),
            Policy::Gucb(n) => n.step(losses),
        }
    }

    fn action(&self, v: usize) -> usize {
        match self {
            Policy::Exp3(n) => n.agents[v].last_action.unwrap_or(0),
            Policy::Gucb(n) => n.actions[v],
        }
    }

    fn charge(&self, v: usize, mean_loss: &[f64], mode: RegretMode) -> f64 {
        match (self, mode) {
            (Policy::Exp3(n), RegretMode::Expected) => n.agents[v]
                .p
                .iter()
                .zip(mean_loss)
                .map(|(p, l)| p * l)
                .sum(),
            _ => mean_loss[self.action(v)],
        }
    }
}

/// Cumulative regret against the best fixed arm of the whole horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub best_arm: usize,
    /// `sum_t mean_loss_t(best_arm)` over the full horizon.
    pub best_arm_total: f64,
    /// Network-average cumulative regret; entry `t` covers rounds `1..=t`,
    /// entry 0 is zero.
    pub avg_regret: Vec<f64>,
    /// Final regret of every agent.
    pub per_agent_final: Vec<f64>,
    /// `per_agent[v][t]`, kept when actions are recorded.
    pub per_agent: Option<Vec<Vec<f64>>>,
}

impl RegretTrace {
    pub fn final_avg(&self) -> f64 {
        *self.avg_regret.last().unwrap_or(&0.0)
    }
}

/// Per-round consensus quantities of a FedExp3 or Exp3 run.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusDiagnostics {
    /// `f_t`, mean loss estimate of round `t` (index `t - 1`).
    pub f: Vec<Vec<f64>>,
    /// Mean cumulative estimate; entry 0 is the all-zero start.
    pub zbar: Vec<Vec<f64>>,
    /// `max_v |z_t^v - zbar_t|_inf`, entry 0 is zero.
    pub max_disagreement: Vec<f64>,
    /// `max_i |zbar_{t+1} - zbar_t - f_t|`.
    pub recursion_residual: Vec<f64>,
    /// `max_v |g_t^v|_inf`.
    pub max_estimator_norm: Vec<f64>,
    pub gamma: Vec<f64>,
    pub arms: usize,
    pub disagreement_bound: f64,
}

impl ConsensusDiagnostics {
    pub fn recursion_violations(&self, tol: f64) -> usize {
        self.recursion_residual
            .iter()
            .filter(|&&r| !(r <= tol))
            .count()
    }

    /// Rounds where some `|g|_inf` exceeds `K / gamma_t`.
    pub fn estimator_bound_violations(&self) -> usize {
        self.max_estimator_norm
            .iter()
            .zip(&self.gamma)
            .filter(|&(&g, &gamma)| !(g <= self.arms as f64 / gamma * (1.0 + 1e-12)))
            .count()
    }

    pub fn disagreement_violations(&self) -> usize {
        self.max_disagreement
            .iter()
            .filter(|&&d| !(d <= self.disagreement_bound))
            .count()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub seed: u64,
    pub environment_seed: Option<u64>,
    pub trace: RegretTrace,
    pub diagnostics: Option<ConsensusDiagnostics>,
    /// `actions[t][v]`, 0-based rounds, kept when requested.
    pub actions: Option<Vec<Vec<usize>>>,
}

/// Plays `cfg.horizon` rounds with run seed `seed`.
pub fn run_once(cfg: &SimConfig, seed: u64) -> Result<RunOutput> {
    cfg.validate()?;
    let env = cfg.build_environment(seed)?;
    let (n, k, horizon) = (cfg.agent_count(), cfg.arms, cfg.horizon);
    let schedule = cfg.schedule_for()?;
    let mut policy = match (cfg.algorithm, &schedule) {
        (Algorithm::Gucb, _) => {
            Policy::Gucb(GucbNetwork::new(cfg.gossip.clone(), k, cfg.gucb_alpha))
        }
        (Algorithm::FedExp3, Some(s)) => Policy::Exp3(Box::new(Exp3Network::new(
            cfg.gossip.clone(),
            s.clone(),
            seed,
            cfg.execution,
        ))),
        (Algorithm::Exp3, Some(s)) => Policy::Exp3(Box::new(Exp3Network::new(
            GossipMatrix::identity(n),
            s.clone(),
            seed,
            cfg.execution,
        ))),
        (_, None) => unreachable!("exp3 family always has a schedule"),
    };

    let mut diag = match (&policy, &schedule) {
        (Policy::Exp3(_), Some(s)) if cfg.diagnostics => Some(ConsensusDiagnostics {
            f: Vec::with_capacity(horizon),
            zbar: vec![vec![0.0; k]],
            max_disagreement: vec![0.0],
            recursion_residual: Vec::with_capacity(horizon),
            max_estimator_norm: Vec::with_capacity(horizon),
            gamma: Vec::with_capacity(horizon),
            arms: k,
            disagreement_bound: s.disagreement_bound(),
        }),
        _ => None,
    };

    let mut round = vec![0.0; n * k];
    let mut paid = vec![0.0; n];
    let mut avg_paid = Vec::with_capacity(horizon + 1);
    avg_paid.push(0.0);
    let mut mean_hist: Vec<Vec<f64>> = Vec::with_capacity(horizon);
    let mut arm_totals = vec![0.0; k];
    let mut actions = cfg.record_actions.then(|| Vec::with_capacity(horizon));
    let mut paid_hist = cfg.record_actions.then(|| vec![vec![0.0]; n]);

    for t in 0..horizon {
        env.fill_round(t, &mut round);
        let lbar = mean_over_agents(&round, n, k);
        policy.step(&round)?;

        for (v, total) in paid.iter_mut().enumerate() {
            *total += policy.charge(v, &lbar, cfg.regret_mode);
        }
        avg_paid.push(paid.iter().sum::<f64>() / n as f64);
        if let Some(hist) = paid_hist.as_mut() {
            for (h, &p) in hist.iter_mut().zip(&paid) {
                h.push(p);
            }
        }
        if let Some(log) = actions.as_mut() {
            log.push((0..n).map(|v| policy.action(v)).collect());
        }
        for (tot, l) in arm_totals.iter_mut().zip(&lbar) {
            *tot += l;
        }
        mean_hist.push(lbar);

        if let (Some(d), Policy::Exp3(net)) = (diag.as_mut(), &policy) {
            let f = net.mean_g();
            let zbar = net.mean_z();
            let prev = d.zbar.last().expect("zbar starts non-empty");
            let residual = zbar
                .iter()
                .zip(prev)
                .zip(&f)
                .map(|((z, p), f)| (z - p - f).abs())
                .fold(0.0, f64::max);
            let disagreement = net
                .agents()
                .iter()
                .flat_map(|a| a.z.iter().zip(&zbar).map(|(z, m)| (z - m).abs()))
                .fold(0.0, f64::max);
            let g_norm = net
                .agents()
                .iter()
                .flat_map(|a| a.g.iter().map(|g| g.abs()))
                .fold(0.0, f64::max);
            d.recursion_residual.push(residual);
            d.max_disagreement.push(disagreement);
            d.max_estimator_norm.push(g_norm);
            d.gamma.push(net.schedule().gamma(t + 1));
            d.f.push(f);
            d.zbar.push(zbar);
        }
    }

    let (best_arm, best_arm_total) = argmin(&arm_totals);
    let mut bench = Vec::with_capacity(horizon + 1);
    bench.push(0.0);
    let mut acc = 0.0;
    for l in &mean_hist {
        acc += l[best_arm];
        bench.push(acc);
    }
    let avg_regret = avg_paid.iter().zip(&bench).map(|(p, b)| p - b).collect();
    let per_agent_final = paid.iter().map(|p| p - best_arm_total).collect();
    let per_agent = paid_hist.map(|hist| {
        hist.into_iter()
            .map(|h| h.iter().zip(&bench).map(|(p, b)| p - b).collect())
            .collect()
    });

    Ok(RunOutput {
        seed,
        environment_seed: cfg.environment_seed(seed),
        trace: RegretTrace {
            best_arm,
            best_arm_total,
            avg_regret,
            per_agent_final,
            per_agent,
        },
        diagnostics: diag,
        actions,
    })
}

/// Mean and spread of the network-average regret across runs.
#[derive(Debug, Clone)]
pub struct Aggregate {
    pub runs: Vec<RunOutput>,
    /// Mean network-average regret per round (entry 0 is zero).
    pub mean: Vec<f64>,
    /// Sample standard deviation across runs (zero for a single run).
    pub sd: Vec<f64>,
    /// Mean final regret of every agent across runs.
    pub per_agent_mean_final: Vec<f64>,
}

impl Aggregate {
    pub fn run_count(&self) -> usize {
        self.runs.len()
    }

    pub fn final_mean(&self) -> f64 {
        *self.mean.last().unwrap_or(&0.0)
    }

    pub fn final_sd(&self) -> f64 {
        *self.sd.last().unwrap_or(&0.0)
    }

    /// Standard error of the mean at every round.
    pub fn sem(&self) -> Vec<f64> {
        let r = (self.runs.len() as f64).sqrt();
        self.sd.iter().map(|s| s / r).collect()
    }

    /// `(t, mean regret)` at the given rounds.
    pub fn at(&self, checkpoints: &[usize]) -> Vec<(usize, f64)> {
        checkpoints.iter().map(|&t| (t, self.mean[t])).collect()
    }
}

/// Runs `cfg.runs` independent seeds split from `cfg.seed`.
pub fn aggregate(cfg: &SimConfig) -> Result<Aggregate> {
    cfg.validate()?;
    let runs = try_map(cfg.execution, cfg.runs, |r| {
        run_once(cfg, run_seed(cfg.seed, r))
    })?;
    let len = cfg.horizon + 1;
    let mut mean = Vec::with_capacity(len);
    let mut sd = Vec::with_capacity(len);
    let mut column = Vec::with_capacity(runs.len());
    for t in 0..len {
        column.clear();
        column.extend(runs.iter().map(|r| r.trace.avg_regret[t]));
        let (m, s) = stats::mean_sd(&column);
        mean.push(m);
        sd.push(s);
    }
    let n = cfg.agent_count();
    let per_agent_mean_final = (0..n)
        .map(|v| runs.iter().map(|r| r.trace.per_agent_final[v]).sum::<f64>() / runs.len() as f64)
        .collect();
    Ok(Aggregate {
        runs,
        mean,
        sd,
        per_agent_mean_final,
    })
}

/// Mean regret at `checkpoints`, for growth-exponent fits.
pub fn scaling_probe(cfg: &SimConfig, checkpoints: &[usize]) -> Result<Vec<(usize, f64)>> {
    if let Some(&bad) = checkpoints.iter().find(|&&t| t == 0 || t > cfg.horizon) {
        return Err(Error::Config(format!(
            "checkpoint {bad} outside 1..={}",
            cfg.horizon
        )));
    }
    Ok(aggregate(cfg)?.at(checkpoints))
}
