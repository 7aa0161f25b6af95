//! Off-policy actor-critic machinery shared by DDPG, TD3 and the hybrid loop.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_len, Error, Result};
use crate::net::{AdamState, NetParams, NetSpec};
use crate::seeding::{derive_seed, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Genuine terminal only; horizon truncation keeps the bootstrap term.
    pub done: bool,
}

/// Fixed-capacity cyclic buffer; once full, each push overwrites the oldest entry.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub const DEFAULT_CAPACITY: usize = 1_000_000;

    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        ReplayBuffer {
            capacity,
            items: Vec::new(),
            cursor: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Stored transitions, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.cursor };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    /// Uniform sampling with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Batch> {
        if self.items.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let picks: Vec<&Transition> = (0..batch_size)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect();
        Batch::from_transitions(&picks)
    }
}

/// Column-stacked mini-batch, row-major per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn from_transitions(ts: &[&Transition]) -> Result<Self> {
        let first = ts
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
        let (obs_dim, action_dim) = (first.state.len(), first.action.len());
        let mut b = Batch {
            size: ts.len(),
            obs_dim,
            action_dim,
            states: Vec::with_capacity(ts.len() * obs_dim),
            actions: Vec::with_capacity(ts.len() * action_dim),
            rewards: Vec::with_capacity(ts.len()),
            next_states: Vec::with_capacity(ts.len() * obs_dim),
            dones: Vec::with_capacity(ts.len()),
        };
        for t in ts {
            check_len("transition state", obs_dim, t.state.len())?;
            check_len("transition next_state", obs_dim, t.next_state.len())?;
            check_len("transition action", action_dim, t.action.len())?;
            b.states.extend_from_slice(&t.state);
            b.actions.extend_from_slice(&t.action);
            b.rewards.push(t.reward);
            b.next_states.extend_from_slice(&t.next_state);
            b.dones.push(t.done);
        }
        Ok(b)
    }
}

fn concat_rows(a: &[f64], a_dim: usize, b: &[f64], b_dim: usize, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * (a_dim + b_dim));
    for (ra, rb) in a.chunks_exact(a_dim).zip(b.chunks_exact(b_dim)) {
        out.extend_from_slice(ra);
        out.extend_from_slice(rb);
    }
    out
}

/// `target <- tau · live + (1 - tau) · target`.
pub fn soft_update(target: &mut NetParams, live: &NetParams, tau: f64) {
    assert_eq!(target.len(), live.len(), "soft update of mismatched networks");
    for (t, l) in target.0.iter_mut().zip(&live.0) {
        *t = tau * l + (1.0 - tau) * *t;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticVariant {
    /// Single critic, no target smoothing.
    Ddpg,
    /// Twin critics with the min target and target policy smoothing.
    Td3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub variant: CriticVariant,
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub policy_noise: f64,
    pub noise_clip: f64,
    pub policy_delay: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            variant: CriticVariant::Td3,
            gamma: 0.99,
            tau: 5e-3,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            batch_size: 100,
            policy_noise: 0.2,
            noise_clip: 0.5,
            policy_delay: 2,
        }
    }
}

impl LearnerConfig {
    pub fn ddpg() -> Self {
        LearnerConfig {
            variant: CriticVariant::Ddpg,
            policy_delay: 1,
            ..Default::default()
        }
    }

    /// Actor updates happen every `policy_delay`-th iteration (always 1 for DDPG).
    pub fn effective_policy_delay(&self) -> usize {
        match self.variant {
            CriticVariant::Ddpg => 1,
            CriticVariant::Td3 => self.policy_delay.max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    pub params: NetParams,
    pub target: NetParams,
    pub adam: AdamState,
}

impl Critic {
    fn new(params: NetParams, lr: f64) -> Self {
        Critic {
            target: params.clone(),
            adam: AdamState::new(params.len(), lr),
            params,
        }
    }
}

/// An actor being trained: live weights, target copy and its own optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorLearner {
    pub params: NetParams,
    pub target: NetParams,
    pub adam: AdamState,
}

impl ActorLearner {
    /// Target initialized as an exact copy of `params`, fresh Adam moments.
    pub fn new(params: NetParams, lr: f64) -> Self {
        ActorLearner {
            target: params.clone(),
            adam: AdamState::new(params.len(), lr),
            params,
        }
    }
}

/// Shared critic side of DDPG/TD3: live and target critics plus their
/// optimizers. Persists across CEM-RL generations.
#[derive(Debug, Clone)]
pub struct Learner {
    pub config: LearnerConfig,
    pub actor_spec: NetSpec,
    pub critic_spec: NetSpec,
    pub critics: Vec<Critic>,
}

impl Learner {
    pub fn new(config: LearnerConfig, actor_spec: NetSpec, critic_spec: NetSpec, seed: u64) -> Result<Self> {
        let n = match config.variant {
            CriticVariant::Ddpg => 1,
            CriticVariant::Td3 => 2,
        };
        let params = (0..n)
            .map(|k| critic_spec.init_params(derive_seed(seed, Stream::CriticInit, k)))
            .collect();
        Self::from_parts(config, actor_spec, critic_spec, params)
    }

    /// Builds a learner around explicit critic parameters (targets copy them).
    pub fn from_parts(
        config: LearnerConfig,
        actor_spec: NetSpec,
        critic_spec: NetSpec,
        critic_params: Vec<NetParams>,
    ) -> Result<Self> {
        let expected = match config.variant {
            CriticVariant::Ddpg => 1,
            CriticVariant::Td3 => 2,
        };
        check_len("critic count", expected, critic_params.len())?;
        check_len(
            "critic input",
            actor_spec.input_dim() + actor_spec.output_dim(),
            critic_spec.input_dim(),
        )?;
        check_len("critic output", 1, critic_spec.output_dim())?;
        for p in &critic_params {
            critic_spec.check_params(p)?;
        }
        let critics = critic_params
            .into_iter()
            .map(|p| Critic::new(p, config.critic_lr))
            .collect();
        Ok(Learner {
            config,
            actor_spec,
            critic_spec,
            critics,
        })
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.size == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        check_len("batch observation", self.actor_spec.input_dim(), batch.obs_dim)?;
        check_len("batch action", self.actor_spec.output_dim(), batch.action_dim)
    }

    /// Bootstrapped regression targets.
    ///
    /// TD3: `r + γ(1-done)·min(Q1_t, Q2_t)(s', ã)` with
    /// `ã = clamp(π_t(s') + clamp(ξ, ±noise_clip), ±1)`, `ξ ~ N(0, policy_noise)`.
    /// DDPG: `r + γ(1-done)·Q1_t(s', π_t(s'))`.
    pub fn critic_target<R: Rng + ?Sized>(
        &self,
        batch: &Batch,
        actor_target: &NetParams,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        self.bootstrap_targets(batch, actor_target, rng, self.critics.len())
    }

    /// The same target computed from `Q1_t` alone, with the same smoothing
    /// noise draws as [`Learner::critic_target`] under an identical RNG.
    pub fn single_critic_target<R: Rng + ?Sized>(
        &self,
        batch: &Batch,
        actor_target: &NetParams,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        self.bootstrap_targets(batch, actor_target, rng, 1)
    }

    fn bootstrap_targets<R: Rng + ?Sized>(
        &self,
        batch: &Batch,
        actor_target: &NetParams,
        rng: &mut R,
        n_critics: usize,
    ) -> Result<Vec<f64>> {
        self.check_batch(batch)?;
        let n = batch.size;
        let mut next_actions = self
            .actor_spec
            .forward_batch(actor_target, &batch.next_states, n)?
            .activations
            .pop()
            .expect("output layer");
        if self.config.variant == CriticVariant::Td3 && self.config.policy_noise > 0.0 {
            let noise = Normal::new(0.0, self.config.policy_noise)
                .map_err(|e| Error::InvalidArgument(format!("policy noise: {e}")))?;
            let c = self.config.noise_clip;
            for a in &mut next_actions {
                let xi: f64 = noise.sample(rng).clamp(-c, c);
                *a = (*a + xi).clamp(-1.0, 1.0);
            }
        }
        let inputs = concat_rows(&batch.next_states, batch.obs_dim, &next_actions, batch.action_dim, n);
        let mut q_next = vec![f64::INFINITY; n];
        for critic in &self.critics[..n_critics] {
            let trace = self.critic_spec.forward_batch(&critic.target, &inputs, n)?;
            for (q, v) in q_next.iter_mut().zip(trace.output()) {
                *q = q.min(*v);
            }
        }
        Ok(batch
            .rewards
            .iter()
            .zip(&batch.dones)
            .zip(&q_next)
            .map(|((r, &done), q)| if done { *r } else { r + self.config.gamma * q })
            .collect())
    }

    /// Q-values of every live critic on `(state, action)` rows.
    pub fn q_values(&self, batch: &Batch) -> Result<Vec<Vec<f64>>> {
        self.check_batch(batch)?;
        let inputs = concat_rows(&batch.states, batch.obs_dim, &batch.actions, batch.action_dim, batch.size);
        self.critics
            .iter()
            .map(|c| Ok(self.critic_spec.forward_batch(&c.params, &inputs, batch.size)?.output().to_vec()))
            .collect()
    }

    /// One Adam step per live critic on the mean squared TD error against the
    /// frozen targets. Returns the summed per-critic mean losses.
    pub fn critic_update<R: Rng + ?Sized>(
        &mut self,
        batch: &Batch,
        actor_target: &NetParams,
        rng: &mut R,
    ) -> Result<f64> {
        let y = self.critic_target(batch, actor_target, rng)?;
        self.critic_update_with_targets(batch, &y)
    }

    pub fn critic_update_with_targets(&mut self, batch: &Batch, y: &[f64]) -> Result<f64> {
        self.check_batch(batch)?;
        check_len("critic targets", batch.size, y.len())?;
        let n = batch.size;
        let inputs = concat_rows(&batch.states, batch.obs_dim, &batch.actions, batch.action_dim, n);
        let mut total = 0.0;
        let mut pending = Vec::with_capacity(self.critics.len());
        for critic in &self.critics {
            let trace = self.critic_spec.forward_batch(&critic.params, &inputs, n)?;
            let q = trace.output();
            let mut loss = 0.0;
            let upstream: Vec<f64> = q
                .iter()
                .zip(y)
                .map(|(q, y)| {
                    let e = q - y;
                    loss += e * e;
                    2.0 * e / n as f64
                })
                .collect();
            loss /= n as f64;
            if !loss.is_finite() {
                return Err(Error::Divergence(format!("critic loss is {loss}")));
            }
            total += loss;
            let g = self.critic_spec.backward_batch(&critic.params, &trace, &upstream)?;
            pending.push(g.params);
        }
        for (critic, g) in self.critics.iter_mut().zip(&pending) {
            critic.adam.step(&mut critic.params.0, g)?;
        }
        Ok(total)
    }

    /// Mean over the batch of `Q1(s, π(s))` and its gradient with respect to
    /// the actor parameters (critic frozen).
    pub fn actor_objective(&self, actor: &NetParams, batch: &Batch) -> Result<(f64, Vec<f64>)> {
        self.check_batch(batch)?;
        let n = batch.size;
        let (obs_dim, act_dim) = (batch.obs_dim, batch.action_dim);
        let actor_trace = self.actor_spec.forward_batch(actor, &batch.states, n)?;
        let inputs = concat_rows(&batch.states, obs_dim, actor_trace.output(), act_dim, n);
        let q1 = &self.critics[0].params;
        let critic_trace = self.critic_spec.forward_batch(q1, &inputs, n)?;
        let objective = critic_trace.output().iter().sum::<f64>() / n as f64;
        let upstream = vec![1.0 / n as f64; n];
        let dq_dinput = self.critic_spec.input_gradient_batch(q1, &critic_trace, &upstream)?;
        let dq_da: Vec<f64> = dq_dinput
            .chunks_exact(obs_dim + act_dim)
            .flat_map(|row| row[obs_dim..].iter().copied())
            .collect();
        let g = self.actor_spec.backward_batch(actor, &actor_trace, &dq_da)?;
        Ok((objective, g.params))
    }

    /// One Adam ascent step of `actor` on the critic's mean action value.
    pub fn actor_update(&self, actor: &mut ActorLearner, batch: &Batch) -> Result<f64> {
        let (objective, grad) = self.actor_objective(&actor.params, batch)?;
        if !objective.is_finite() {
            return Err(Error::Divergence(format!("actor objective is {objective}")));
        }
        let descent: Vec<f64> = grad.iter().map(|g| -g).collect();
        actor.adam.step(&mut actor.params.0, &descent)?;
        Ok(objective)
    }

    /// Moves every target critic toward its live critic by `tau`.
    pub fn soft_update_critics(&mut self) {
        let tau = self.config.tau;
        for c in &mut self.critics {
            soft_update(&mut c.target, &c.params, tau);
        }
    }

    /// Runs `critic_batches` critic updates (each followed by a target soft
    /// update) and then `actor_batches` actor iterations, updating the actor
    /// and its target every `policy_delay`-th iteration.
    ///
    /// The actor target is used for the critic targets, so it must be a copy
    /// taken before this phase.
    pub fn train_actor_phase<R: Rng + ?Sized>(
        &mut self,
        actor: &mut ActorLearner,
        buffer: &ReplayBuffer,
        critic_batches: usize,
        actor_batches: usize,
        rng: &mut R,
    ) -> Result<PhaseStats> {
        let mut stats = PhaseStats::default();
        if critic_batches == 0 && actor_batches == 0 {
            return Ok(stats);
        }
        let bs = self.config.batch_size;
        for _ in 0..critic_batches {
            let batch = buffer.sample(bs, rng)?;
            stats.last_critic_loss = self.critic_update(&batch, &actor.target, rng)?;
            self.soft_update_critics();
            stats.critic_steps += 1;
        }
        let delay = self.config.effective_policy_delay();
        for k in 0..actor_batches {
            let batch = buffer.sample(bs, rng)?;
            if k % delay == 0 {
                self.actor_update(actor, &batch)?;
                soft_update(&mut actor.target, &actor.params, self.config.tau);
                stats.actor_steps += 1;
            }
        }
        Ok(stats)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseStats {
    pub critic_steps: usize,
    pub actor_steps: usize,
    pub last_critic_loss: f64,
}
