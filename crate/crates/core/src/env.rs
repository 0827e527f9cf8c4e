//! Oblivious adversaries: loss tensors `L in [0,1]^{T x N x K}`.
//!
//! Rounds are indexed from 0 in this module. Every tensor is a pure function
//! of `(t, v, i)` and its own seed; nothing here ever sees an agent's action.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Accessor for a loss tensor. The backing may be stored or generated.
pub trait LossTensor: Send + Sync {
    fn horizon(&self) -> usize;
    fn agent_count(&self) -> usize;
    fn arm_count(&self) -> usize;

    /// Writes the `N x K` loss matrix of round `t` (row-major by agent) into
    /// `out`, which must have length `N * K`.
    fn fill_round(&self, t: usize, out: &mut [f64]);

    /// Loss of arm `i` for agent `v` at round `t`.
    fn loss(&self, t: usize, v: usize, i: usize) -> f64 {
        let k = self.arm_count();
        let mut buf = vec![0.0; self.agent_count() * k];
        self.fill_round(t, &mut buf);
        buf[v * k + i]
    }
}

fn check_round(tensor: &dyn LossTensor, t: usize) -> Result<()> {
    if t >= tensor.horizon() {
        return Err(Error::RoundOutOfRange {
            t,
            horizon: tensor.horizon(),
        });
    }
    Ok(())
}

/// Network-average loss of every arm at round `t`.
pub fn mean_loss(tensor: &dyn LossTensor, t: usize) -> Result<Vec<f64>> {
    check_round(tensor, t)?;
    let (n, k) = (tensor.agent_count(), tensor.arm_count());
    let mut buf = vec![0.0; n * k];
    tensor.fill_round(t, &mut buf);
    Ok(mean_over_agents(&buf, n, k))
}

pub(crate) fn mean_over_agents(round: &[f64], n: usize, k: usize) -> Vec<f64> {
    let mut mean = vec![0.0; k];
    for row in round.chunks_exact(k) {
        for (m, l) in mean.iter_mut().zip(row) {
            *m += l;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    mean
}

/// Lowest-index arm minimizing the horizon sum of network-average losses,
/// together with that sum.
pub fn best_arm_in_hindsight(tensor: &dyn LossTensor) -> (usize, f64) {
    let (n, k) = (tensor.agent_count(), tensor.arm_count());
    let mut buf = vec![0.0; n * k];
    let mut totals = vec![0.0; k];
    for t in 0..tensor.horizon() {
        tensor.fill_round(t, &mut buf);
        for (tot, m) in totals.iter_mut().zip(mean_over_agents(&buf, n, k)) {
            *tot += m;
        }
    }
    argmin(&totals)
}

/// Lowest index attaining the minimum.
pub(crate) fn argmin(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .copied()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |best, (i, x)| if x < best.1 { (i, x) } else { best },
        )
}

/// The same loss everywhere.
#[derive(Debug, Clone)]
pub struct ConstantLosses {
    horizon: usize,
    agents: usize,
    arms: usize,
    value: f64,
}

pub fn make_constant(
    horizon: usize,
    agents: usize,
    arms: usize,
    value: f64,
) -> Result<ConstantLosses> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidSpec(format!(
            "loss value {value} outside [0, 1]"
        )));
    }
    check_dims(horizon, agents, arms)?;
    Ok(ConstantLosses {
        horizon,
        agents,
        arms,
        value,
    })
}

fn check_dims(horizon: usize, agents: usize, arms: usize) -> Result<()> {
    if horizon == 0 || agents == 0 || arms == 0 {
        return Err(Error::InvalidSpec(format!(
            "dimensions must be positive, got T={horizon} N={agents} K={arms}"
        )));
    }
    Ok(())
}

impl LossTensor for ConstantLosses {
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn agent_count(&self) -> usize {
        self.agents
    }
    fn arm_count(&self) -> usize {
        self.arms
    }
    fn fill_round(&self, _t: usize, out: &mut [f64]) {
        out.fill(self.value);
    }
    fn loss(&self, _t: usize, _v: usize, _i: usize) -> f64 {
        self.value
    }
}

/// A fully stored tensor, indexed `[t][v][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLosses {
    horizon: usize,
    agents: usize,
    arms: usize,
    data: Vec<f64>,
}

impl DenseLosses {
    pub fn new(horizon: usize, agents: usize, arms: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(horizon, agents, arms)?;
        if data.len() != horizon * agents * arms {
            return Err(Error::Shape {
                expected: format!("{} entries", horizon * agents * arms),
                found: format!("{} entries", data.len()),
            });
        }
        if let Some(bad) = data.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidSpec(format!("loss {bad} outside [0, 1]")));
        }
        Ok(Self {
            horizon,
            agents,
            arms,
            data,
        })
    }

    /// Builds a tensor from a closure `f(t, v, i)`.
    pub fn from_fn(
        horizon: usize,
        agents: usize,
        arms: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(horizon * agents * arms);
        for t in 0..horizon {
            for v in 0..agents {
                for i in 0..arms {
                    data.push(f(t, v, i));
                }
            }
        }
        Self::new(horizon, agents, arms, data)
    }

    /// Copies any tensor into storage.
    pub fn materialize(tensor: &dyn LossTensor) -> Self {
        let (t, n, k) = (tensor.horizon(), tensor.agent_count(), tensor.arm_count());
        let mut data = vec![0.0; t * n * k];
        for (round, chunk) in data.chunks_exact_mut(n * k).enumerate() {
            tensor.fill_round(round, chunk);
        }
        Self {
            horizon: t,
            agents: n,
            arms: k,
            data,
        }
    }

    pub fn set(&mut self, t: usize, v: usize, i: usize, value: f64) {
        assert!((0.0..=1.0).contains(&value), "loss {value} outside [0, 1]");
        self.data[(t * self.agents + v) * self.arms + i] = value;
    }
}

impl LossTensor for DenseLosses {
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn agent_count(&self) -> usize {
        self.agents
    }
    fn arm_count(&self) -> usize {
        self.arms
    }
    fn fill_round(&self, t: usize, out: &mut [f64]) {
        let stride = self.agents * self.arms;
        out.copy_from_slice(&self.data[t * stride..(t + 1) * stride]);
    }
    fn loss(&self, t: usize, v: usize, i: usize) -> f64 {
        self.data[(t * self.agents + v) * self.arms + i]
    }
}

/// Parameters of the activated-subset Bernoulli environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivatedBernoulliSpec {
    pub horizon: usize,
    pub agent_count: usize,
    pub arm_count: usize,
    pub seed: u64,
}

/// Each round a uniformly random half of the agents is activated. Activated
/// agents draw arm `i`'s loss from `Bernoulli((i - 1) / (K - 1))` (1-based
/// `i`); everyone else sees zero loss on every arm.
///
/// Round `t` is generated from its own ChaCha stream, so any round can be
/// produced without touching the others.
#[derive(Debug, Clone)]
pub struct ActivatedBernoulli {
    spec: ActivatedBernoulliSpec,
    means: Vec<f64>,
}

pub fn make_activated_bernoulli(spec: ActivatedBernoulliSpec) -> Result<ActivatedBernoulli> {
    check_dims(spec.horizon, spec.agent_count, spec.arm_count)?;
    if !spec.agent_count.is_multiple_of(2) {
        return Err(Error::InvalidSpec(format!(
            "agent count must be even, got {}",
            spec.agent_count
        )));
    }
    if spec.arm_count < 2 {
        return Err(Error::InvalidSpec(format!(
            "need at least two arms, got {}",
            spec.arm_count
        )));
    }
    let k = spec.arm_count;
    let means = (0..k).map(|i| i as f64 / (k - 1) as f64).collect();
    Ok(ActivatedBernoulli { spec, means })
}

impl ActivatedBernoulli {
    /// Arm means, `mu[0] = 0` up to `mu[K-1] = 1`.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn spec(&self) -> ActivatedBernoulliSpec {
        self.spec
    }

    fn round_rng(&self, t: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(t as u64);
        rng
    }

    /// Activated agents of round `t`, in ascending order.
    pub fn activated(&self, t: usize) -> Vec<usize> {
        let n = self.spec.agent_count;
        let mut chosen = index::sample(&mut self.round_rng(t), n, n / 2).into_vec();
        chosen.sort_unstable();
        chosen
    }
}

impl LossTensor for ActivatedBernoulli {
    fn horizon(&self) -> usize {
        self.spec.horizon
    }
    fn agent_count(&self) -> usize {
        self.spec.agent_count
    }
    fn arm_count(&self) -> usize {
        self.spec.arm_count
    }
    fn fill_round(&self, t: usize, out: &mut [f64]) {
        let (n, k) = (self.spec.agent_count, self.spec.arm_count);
        let mut rng = self.round_rng(t);
        let mut chosen = index::sample(&mut rng, n, n / 2).into_vec();
        chosen.sort_unstable();
        out.fill(0.0);
        // draws for non-activated agents are never generated
        for v in chosen {
            for (slot, &mu) in out[v * k..(v + 1) * k].iter_mut().zip(&self.means) {
                *slot = if rng.random::<f64>() < mu { 1.0 } else { 0.0 };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, k: usize) -> ActivatedBernoulliSpec {
        ActivatedBernoulliSpec {
            horizon: 100,
            agent_count: n,
            arm_count: k,
            seed: 3,
        }
    }

    #[test]
    fn bernoulli_rejects_bad_specs() {
        assert!(make_activated_bernoulli(spec(5, 3)).is_err());
        assert!(make_activated_bernoulli(spec(4, 1)).is_err());
    }

    #[test]
    fn two_arm_means() {
        let env = make_activated_bernoulli(spec(4, 2)).unwrap();
        assert_eq!(env.means(), &[0.0, 1.0]);
        for t in 0..100 {
            for v in env.activated(t) {
                assert_eq!(env.loss(t, v, 0), 0.0);
                assert_eq!(env.loss(t, v, 1), 1.0);
            }
        }
        let env = make_activated_bernoulli(spec(4, 5)).unwrap();
        assert_eq!(env.means(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn inactive_agents_see_zero() {
        let env = make_activated_bernoulli(spec(10, 4)).unwrap();
        let mut buf = vec![0.0; 40];
        for t in 0..100 {
            env.fill_round(t, &mut buf);
            let active = env.activated(t);
            assert_eq!(active.len(), 5);
            for v in 0..10 {
                if !active.contains(&v) {
                    assert!(buf[v * 4..(v + 1) * 4].iter().all(|&x| x == 0.0));
                }
            }
        }
    }

    #[test]
    fn round_generation_is_pure() {
        let env = make_activated_bernoulli(spec(6, 3)).unwrap();
        let mut a = vec![0.0; 18];
        let mut b = vec![0.0; 18];
        env.fill_round(42, &mut a);
        env.fill_round(7, &mut b);
        env.fill_round(42, &mut b);
        assert_eq!(a, b);
    }

    #[test]
    fn constant_tensor() {
        let c = make_constant(5, 2, 3, 0.0).unwrap();
        assert_eq!(mean_loss(&c, 4).unwrap(), vec![0.0; 3]);
        assert_eq!(best_arm_in_hindsight(&c), (0, 0.0));
        let c = make_constant(5, 2, 3, 1.0).unwrap();
        assert_eq!(c.loss(0, 1, 2), 1.0);
        assert!(make_constant(5, 2, 3, 1.5).is_err());
        assert!(matches!(
            mean_loss(&c, 5),
            Err(Error::RoundOutOfRange { t: 5, horizon: 5 })
        ));
    }

    #[test]
    fn mean_of_two_agents() {
        let d = DenseLosses::from_fn(1, 2, 3, |_, v, _| if v == 0 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(mean_loss(&d, 0).unwrap(), vec![0.5; 3]);
    }

    #[test]
    fn best_arm_with_ordered_losses() {
        let d = DenseLosses::from_fn(10, 3, 4, |_, _, i| i as f64 / 4.0).unwrap();
        let (arm, total) = best_arm_in_hindsight(&d);
        assert_eq!(arm, 0);
        assert_eq!(total, 0.0);
    }

    #[test]
    fn dense_rejects_out_of_range() {
        assert!(DenseLosses::new(1, 1, 2, vec![0.5, 1.2]).is_err());
        assert!(DenseLosses::new(1, 1, 2, vec![0.5]).is_err());
    }
}
