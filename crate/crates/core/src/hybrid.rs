//! CEM-RL orchestration and its baselines.
//!
//! One generation: draw the population (optionally with importance mixing),
//! give the first half critic-driven gradient steps, evaluate everybody while
//! filling the replay buffer, then refit the search distribution to the top
//! half. The baselines (pure CEM, TD3/DDPG, multi-actor TD3) share the same
//! building blocks.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};

use crate::cem::{select_elites, EliteWeights, Individual, Origin, SearchDistribution, WeightScheme};
use crate::envs::{evaluate, Env, Task};
use crate::error::{Error, Result};
use crate::harness::diagnostics::average_similarity;
use crate::harness::RunRecord;
use crate::mixing::{importance_mix, mixable_subset, GenerationArchive};
use crate::net::{HiddenActivation, NetParams, NetSpec};
use crate::rl::{soft_update, ActorLearner, CriticVariant, Learner, LearnerConfig, ReplayBuffer, Transition};
use crate::seeding::{derive_seed, stream_rng, Rng as StdRng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Cem,
    Ddpg,
    Td3,
    CemDdpg,
    CemTd3,
    MultiActorTd3,
}

impl Algo {
    pub const ALL: [Algo; 6] = [
        Algo::Cem,
        Algo::Ddpg,
        Algo::Td3,
        Algo::CemDdpg,
        Algo::CemTd3,
        Algo::MultiActorTd3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Cem => "cem",
            Algo::Ddpg => "ddpg",
            Algo::Td3 => "td3",
            Algo::CemDdpg => "cem-ddpg",
            Algo::CemTd3 => "cem-td3",
            Algo::MultiActorTd3 => "multi-td3",
        }
    }

    /// Algorithms driven by a CEM search distribution.
    pub fn is_evolutionary(self) -> bool {
        matches!(self, Algo::Cem | Algo::CemDdpg | Algo::CemTd3)
    }

    /// Critic flavour, if the algorithm trains one.
    pub fn critic_variant(self) -> Option<CriticVariant> {
        match self {
            Algo::Cem => None,
            Algo::Ddpg | Algo::CemDdpg => Some(CriticVariant::Ddpg),
            Algo::Td3 | Algo::CemTd3 | Algo::MultiActorTd3 => Some(CriticVariant::Td3),
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('_', "-");
        let norm = if norm == "multi-actor-td3" { "multi-td3".to_string() } else { norm };
        Algo::ALL
            .into_iter()
            .find(|a| a.name() == norm)
            .ok_or_else(|| Error::config("algo", format!("unknown algorithm `{s}`")))
    }
}

/// How many actor mini-batches each learning actor receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetMode {
    /// `2 · actor_steps / pop_size`: the learning half collectively takes
    /// `actor_steps` gradient steps.
    PerText,
    /// `actor_steps` per learning actor.
    PerPseudocode,
}

/// `(critic_batches_per_actor, actor_batches_per_actor)`, floored.
pub fn gradient_budget(actor_steps: u64, pop_size: usize, mode: BudgetMode) -> (usize, usize) {
    let per_actor = (2 * actor_steps / pop_size as u64) as usize;
    match mode {
        BudgetMode::PerText => (per_actor, per_actor),
        BudgetMode::PerPseudocode => (per_actor, actor_steps as usize),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridConfig {
    pub algo: Algo,
    pub task: Task,
    pub max_steps: u64,
    pub pop_size: usize,
    pub importance_mixing: bool,
    /// Std of Gaussian noise added to actions during population evaluation.
    pub action_noise_std: f64,
    pub actor_nonlinearity: HiddenActivation,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub sigma_init: f64,
    pub sigma_end: f64,
    pub tau_cem: f64,
    /// Defaults to `pop_size / 2`.
    pub n_elites: Option<usize>,
    pub weight_scheme: WeightScheme,
    pub learner: LearnerConfig,
    pub buffer_capacity: usize,
    pub budget_mode: BudgetMode,
    /// Upper bound on critic and actor mini-batches per learning actor.
    pub gradient_cap: Option<usize>,
    pub eval_episodes: usize,
    /// Number of actors in multi-actor TD3.
    pub n_actors: usize,
    /// Reporting cadence of the gradient-only baselines, in env steps.
    pub report_interval: u64,
    /// Uniform-random warm-up steps of the TD3/DDPG baselines.
    pub start_steps: u64,
    /// Exploration noise std of the TD3/DDPG baselines.
    pub exploration_noise: f64,
    /// Half-width of the box the black-box initial mean is drawn from.
    pub init_range: f64,
    /// Coordinates closer than this count as shared in the similarity diagnostic.
    pub similarity_tol: f64,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            algo: Algo::CemTd3,
            task: Task::Episodic(Env::PointMass),
            max_steps: 1_000_000,
            pop_size: 10,
            importance_mixing: false,
            action_noise_std: 0.0,
            actor_nonlinearity: HiddenActivation::Tanh,
            actor_hidden: vec![400, 300],
            critic_hidden: vec![400, 300],
            sigma_init: 1e-3,
            sigma_end: 1e-5,
            tau_cem: 0.95,
            n_elites: None,
            weight_scheme: WeightScheme::LogRank,
            learner: LearnerConfig::default(),
            buffer_capacity: ReplayBuffer::DEFAULT_CAPACITY,
            budget_mode: BudgetMode::PerText,
            gradient_cap: None,
            eval_episodes: 10,
            n_actors: 5,
            report_interval: 5000,
            start_steps: 10_000,
            exploration_noise: 0.1,
            init_range: 1.0,
            similarity_tol: 1e-12,
        }
    }
}

impl HybridConfig {
    pub fn elite_count(&self) -> usize {
        self.n_elites.unwrap_or(self.pop_size / 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 2 || self.pop_size % 2 != 0 {
            return Err(Error::config("pop_size", format!("must be even and >= 2, got {}", self.pop_size)));
        }
        if self.max_steps < 1 {
            return Err(Error::config("max_steps", "must be >= 1"));
        }
        let k = self.elite_count();
        if k < 1 || k > self.pop_size {
            return Err(Error::config("n_elites", format!("must lie in [1, pop_size], got {k}")));
        }
        if !(0.0..1.0).contains(&self.tau_cem) {
            return Err(Error::config("tau_cem", format!("must lie in [0, 1), got {}", self.tau_cem)));
        }
        if !(self.sigma_end > 0.0) {
            return Err(Error::config("sigma_end", "must be positive"));
        }
        if !(self.sigma_init >= self.sigma_end) || !self.sigma_init.is_finite() {
            return Err(Error::config("sigma_init", "must be finite and >= sigma_end"));
        }
        let l = &self.learner;
        if !(0.0..=1.0).contains(&l.gamma) {
            return Err(Error::config("gamma", format!("must lie in [0, 1], got {}", l.gamma)));
        }
        if !(0.0..=1.0).contains(&l.tau) {
            return Err(Error::config("tau", format!("must lie in [0, 1], got {}", l.tau)));
        }
        for (key, v) in [("actor_lr", l.actor_lr), ("critic_lr", l.critic_lr)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be positive"));
            }
        }
        for (key, v) in [
            ("policy_noise", l.policy_noise),
            ("noise_clip", l.noise_clip),
            ("action_noise", self.action_noise_std),
            ("exploration_noise", self.exploration_noise),
            ("similarity_tol", self.similarity_tol),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be finite and >= 0"));
            }
        }
        for (key, v) in [
            ("batch_size", l.batch_size),
            ("policy_delay", l.policy_delay),
            ("buffer_size", self.buffer_capacity),
            ("eval_episodes", self.eval_episodes),
            ("n_actors", self.n_actors),
        ] {
            if v == 0 {
                return Err(Error::config(key, "must be >= 1"));
            }
        }
        if self.report_interval == 0 {
            return Err(Error::config("report_interval", "must be >= 1"));
        }
        if self.actor_hidden.contains(&0) {
            return Err(Error::config("actor_hidden", "layer sizes must be positive"));
        }
        if self.critic_hidden.contains(&0) {
            return Err(Error::config("critic_hidden", "layer sizes must be positive"));
        }
        if let Task::BlackBox(p) = self.task {
            if self.algo != Algo::Cem {
                return Err(Error::config(
                    "algo",
                    format!("black-box problem `{}` only supports algo=cem", p.name()),
                ));
            }
            if p.dim == 0 {
                return Err(Error::config("problem_dim", "must be >= 1"));
            }
        }
        Ok(())
    }

    fn learner_config(&self) -> Option<LearnerConfig> {
        self.algo.critic_variant().map(|variant| LearnerConfig {
            variant,
            ..self.learner.clone()
        })
    }

    pub fn actor_spec(&self) -> Result<Option<NetSpec>> {
        match self.task {
            Task::Episodic(env) => {
                let s = env.spec();
                Ok(Some(NetSpec::actor(
                    s.obs_dim,
                    &self.actor_hidden,
                    s.action_dim,
                    self.actor_nonlinearity,
                )?))
            }
            Task::BlackBox(_) => Ok(None),
        }
    }

    pub fn critic_spec(&self) -> Result<Option<NetSpec>> {
        match self.task {
            Task::Episodic(env) => {
                let s = env.spec();
                Ok(Some(NetSpec::critic(s.obs_dim, s.action_dim, &self.critic_hidden)?))
            }
            Task::BlackBox(_) => Ok(None),
        }
    }

    /// Initial mean genome: a fresh actor network, or a uniform point in
    /// `[-init_range, init_range]^dim` for black-box problems.
    pub fn initial_mean(&self, seed: u64) -> Result<Vec<f64>> {
        match self.task {
            Task::Episodic(_) => {
                let spec = self.actor_spec()?.expect("episodic task");
                Ok(spec.init_params(derive_seed(seed, Stream::ActorInit, 0)).into_flat())
            }
            Task::BlackBox(p) => {
                let mut rng = stream_rng(seed, Stream::ActorInit, 0);
                Ok((0..p.dim).map(|_| rng.random_range(-self.init_range..=self.init_range)).collect())
            }
        }
    }
}

/// Everything that persists between generations.
#[derive(Debug, Clone)]
pub struct LoopState {
    pub seed: u64,
    pub total_steps: u64,
    /// Env steps of the previous generation's evaluations.
    pub actor_steps: u64,
    pub generation: u64,
    pub dist: SearchDistribution,
    pub archive: Option<GenerationArchive>,
    pub learner: Option<Learner>,
    pub buffer: Option<ReplayBuffer>,
    pub actor_spec: Option<NetSpec>,
    /// Evaluated population of the last generation.
    pub population: Vec<Individual>,
    /// Transitions pushed to the replay buffer so far.
    pub transitions_stored: u64,
}

impl LoopState {
    pub fn new(config: &HybridConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mu = config.initial_mean(seed)?;
        let dist = SearchDistribution::new(mu, config.sigma_init, config.sigma_end, config.tau_cem)?;
        let actor_spec = config.actor_spec()?;
        let learner = match (config.learner_config(), &actor_spec, config.critic_spec()?) {
            (Some(lc), Some(a), Some(c)) => Some(Learner::new(lc, a.clone(), c, seed)?),
            _ => None,
        };
        let buffer = learner.as_ref().map(|_| ReplayBuffer::new(config.buffer_capacity));
        Ok(LoopState {
            seed,
            total_steps: 0,
            actor_steps: 0,
            generation: 0,
            dist,
            archive: None,
            learner,
            buffer,
            actor_spec,
            population: Vec::new(),
            transitions_stored: 0,
        })
    }
}

/// Per-generation diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSummary {
    pub generation: u64,
    pub reuse_fraction: f64,
    pub similarity: f64,
    pub critic_batches: usize,
    pub actor_batches: usize,
    pub best_fitness: f64,
    pub clamped_actions: u64,
}

/// Fitness, env steps, transitions and clamped-action count of one
/// individual evaluation.
fn evaluate_genome(
    config: &HybridConfig,
    actor_spec: Option<&NetSpec>,
    genome: &[f64],
    rng: &mut StdRng,
) -> Result<(f64, u64, Vec<Transition>, u64)> {
    match config.task {
        Task::Episodic(env) => {
            let spec = actor_spec.expect("episodic task has an actor");
            let ev = evaluate(spec, genome, &env, 1, rng, config.action_noise_std)?;
            Ok((ev.mean_return, ev.env_steps, ev.transitions, ev.clamped_actions))
        }
        Task::BlackBox(p) => Ok((p.fitness(genome)?, 1, Vec::new(), 0)),
    }
}

/// Runs one generation of the evolutionary algorithms (CEM, CEM-DDPG, CEM-TD3).
pub fn run_generation(state: &mut LoopState, config: &HybridConfig) -> Result<GenerationSummary> {
    let g = state.generation;
    run_generation_inner(state, config).map_err(|e| e.at_generation(g))
}

fn run_generation_inner(state: &mut LoopState, config: &HybridConfig) -> Result<GenerationSummary> {
    if !config.algo.is_evolutionary() {
        return Err(Error::config("algo", format!("{} has no generation structure", config.algo)));
    }
    let pop_size = config.pop_size;
    let half = pop_size / 2;
    let learns = state.learner.is_some();
    let mut sampling_rng = stream_rng(state.seed, Stream::Sampling, state.generation);

    // (1) population
    let mut pop: Vec<Individual> = match (&state.archive, config.importance_mixing) {
        (Some(archive), true) => {
            let mut pop = Vec::with_capacity(pop_size);
            let mixed_size = if learns {
                pop.extend(
                    state
                        .dist
                        .sample_population(half, &mut sampling_rng)
                        .into_iter()
                        .map(Individual::sampled),
                );
                half
            } else {
                pop_size
            };
            pop.extend(importance_mix(archive, &state.dist, mixed_size, &mut sampling_rng)?.individuals);
            pop
        }
        _ => state
            .dist
            .sample_population(pop_size, &mut sampling_rng)
            .into_iter()
            .map(Individual::sampled)
            .collect(),
    };

    // (2) gradient phase on the first half
    let (mut critic_batches, mut actor_batches) = gradient_budget(state.actor_steps, pop_size, config.budget_mode);
    if let Some(cap) = config.gradient_cap {
        critic_batches = critic_batches.min(cap);
        actor_batches = actor_batches.min(cap);
    }
    if let (Some(learner), Some(buffer)) = (state.learner.as_mut(), state.buffer.as_ref()) {
        let mut train_rng = stream_rng(state.seed, Stream::Training, state.generation);
        for ind in pop.iter_mut().take(half) {
            let params = NetParams(std::mem::take(&mut ind.genome));
            let mut actor = ActorLearner::new(params, learner.config.actor_lr);
            learner.train_actor_phase(&mut actor, buffer, critic_batches, actor_batches, &mut train_rng)?;
            ind.genome = actor.params.into_flat();
            ind.origin = Origin::GradientStepped;
        }
    } else {
        critic_batches = 0;
        actor_batches = 0;
    }

    // (3) evaluation
    let mut actor_steps = 0;
    let mut clamped = 0;
    let mut reused = 0;
    for (i, ind) in pop.iter_mut().enumerate() {
        if ind.origin == Origin::Reused {
            reused += 1;
            continue;
        }
        let mut rng = stream_rng(state.seed, Stream::Evaluation, state.generation * pop_size as u64 + i as u64);
        let (fitness, steps, transitions, c) =
            evaluate_genome(config, state.actor_spec.as_ref(), &ind.genome, &mut rng)?;
        ind.fitness = Some(fitness);
        ind.env_steps = steps;
        actor_steps += steps;
        clamped += c;
        if let Some(buf) = state.buffer.as_mut() {
            state.transitions_stored += transitions.len() as u64;
            for t in transitions {
                buf.push(t);
            }
        }
    }

    // (4) step accounting
    state.actor_steps = actor_steps;
    state.total_steps += actor_steps;

    // (5) distribution update from the top half of the whole population
    let weights = EliteWeights::new(config.weight_scheme, config.elite_count())?;
    let elites = select_elites(&pop, weights.n_elites())?;
    let best_fitness = pop.iter().filter_map(|i| i.fitness).fold(f64::NEG_INFINITY, f64::max);
    let snapshot = state.dist.clone();
    state.dist.update(&elites, &weights)?;
    state.archive = if config.importance_mixing {
        Some(GenerationArchive::new(mixable_subset(&pop), snapshot)?)
    } else {
        None
    };

    let genomes: Vec<&[f64]> = pop.iter().map(|i| i.genome.as_slice()).collect();
    let similarity = average_similarity(&genomes, config.similarity_tol)?;
    let summary = GenerationSummary {
        generation: state.generation,
        reuse_fraction: reused as f64 / pop_size as f64,
        similarity,
        critic_batches,
        actor_batches,
        best_fitness,
        clamped_actions: clamped,
    };
    state.population = pop;
    state.generation += 1;
    Ok(summary)
}

/// Episode start seeds of the reporting rollouts; identical for every report
/// of a run so checkpoints are compared on the same episodes.
fn reporting_rng(seed: u64) -> StdRng {
    stream_rng(seed, Stream::Reporting, 0)
}

/// Greedy rollouts used only for reporting; nothing reaches the buffer.
fn report_returns(config: &HybridConfig, actor_spec: Option<&NetSpec>, genome: &[f64], seed: u64) -> Result<(Vec<f64>, u64)> {
    match config.task {
        Task::Episodic(env) => {
            let spec = actor_spec.expect("episodic task has an actor");
            let ev = evaluate(spec, genome, &env, config.eval_episodes, &mut reporting_rng(seed), 0.0)?;
            Ok((ev.episode_returns, ev.env_steps))
        }
        Task::BlackBox(p) => Ok((vec![p.fitness(genome)?], 0)),
    }
}

/// Runs a full experiment and returns one record per report.
pub fn run_experiment(config: &HybridConfig, seed: u64) -> Result<Vec<RunRecord>> {
    config.validate()?;
    match config.algo {
        Algo::Cem | Algo::CemDdpg | Algo::CemTd3 => run_evolutionary(config, seed),
        Algo::Td3 | Algo::Ddpg => run_gradient_baseline(config, seed),
        Algo::MultiActorTd3 => run_multi_actor(config, seed),
    }
}

fn run_evolutionary(config: &HybridConfig, seed: u64) -> Result<Vec<RunRecord>> {
    let start = Instant::now();
    let mut state = LoopState::new(config, seed)?;
    let mut records = Vec::new();
    loop {
        let summary = run_generation(&mut state, config)?;
        let (returns, reporting_steps) = report_returns(config, state.actor_spec.as_ref(), &state.dist.mu, seed)
            .map_err(|e| e.at_generation(summary.generation))?;
        records.push(RunRecord::new(
            state.total_steps,
            summary.generation,
            returns,
            start.elapsed().as_secs_f64(),
            summary.reuse_fraction,
            state.dist.epsilon,
            Some(summary.similarity),
            reporting_steps,
        ));
        if state.total_steps >= config.max_steps {
            break;
        }
    }
    Ok(records)
}

fn episodic_env(config: &HybridConfig) -> Result<Env> {
    match config.task {
        Task::Episodic(env) => Ok(env),
        Task::BlackBox(p) => Err(Error::config("env", format!("{} needs an episodic environment, got `{}`", config.algo, p.name()))),
    }
}

/// Plain TD3 / DDPG: one training iteration per environment step after a
/// uniform-random warm-up, reporting every `report_interval` steps.
fn run_gradient_baseline(config: &HybridConfig, seed: u64) -> Result<Vec<RunRecord>> {
    let start = Instant::now();
    let env = episodic_env(config)?;
    let horizon = env.spec().horizon;
    let state = LoopState::new(config, seed)?;
    let actor_spec = state.actor_spec.expect("episodic");
    let mut learner = state.learner.expect("gradient baseline has a critic");
    let mut buffer = state.buffer.expect("gradient baseline has a buffer");
    let mut actor = ActorLearner::new(NetParams(state.dist.mu), learner.config.actor_lr);

    let mut explore_rng = stream_rng(seed, Stream::Exploration, 0);
    let mut train_rng = stream_rng(seed, Stream::Training, 0);
    let noise = Normal::new(0.0, config.exploration_noise.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::config("exploration_noise", e.to_string()))?;
    let delay = learner.config.effective_policy_delay();
    let tau = learner.config.tau;

    let mut records = Vec::new();
    let mut obs = env.reset(explore_rng.next_u64());
    let mut t_episode = 0;
    let mut iteration = 0u64;
    for t in 0..config.max_steps {
        let action: Vec<f64> = if t < config.start_steps {
            (0..actor_spec.output_dim()).map(|_| explore_rng.random_range(-1.0..=1.0)).collect()
        } else {
            let mut a = actor_spec.forward(&actor.params, &obs)?;
            if config.exploration_noise > 0.0 {
                for v in &mut a {
                    *v = (*v + noise.sample(&mut explore_rng)).clamp(-1.0, 1.0);
                }
            }
            a
        };
        let out = env.step(&obs, &action)?;
        if out.next_state.iter().any(|v| !v.is_finite()) {
            return Err(Error::EnvBlowUp { step: t_episode });
        }
        buffer.push(Transition {
            state: obs,
            action,
            reward: out.reward,
            next_state: out.next_state.clone(),
            done: out.terminal,
        });
        obs = out.next_state;
        t_episode += 1;
        if out.terminal || t_episode == horizon {
            obs = env.reset(explore_rng.next_u64());
            t_episode = 0;
        }

        if t >= config.start_steps && buffer.len() >= 1 {
            iteration += 1;
            let batch = buffer.sample(learner.config.batch_size, &mut train_rng)?;
            learner.critic_update(&batch, &actor.target, &mut train_rng)?;
            if iteration % delay as u64 == 0 {
                learner.actor_update(&mut actor, &batch)?;
                soft_update(&mut actor.target, &actor.params, tau);
                learner.soft_update_critics();
            }
        }

        let done_steps = t + 1;
        if done_steps % config.report_interval == 0 || done_steps == config.max_steps {
            let (returns, reporting_steps) = report_returns(config, Some(&actor_spec), &actor.params.0, seed)?;
            records.push(RunRecord::new(
                done_steps,
                records.len() as u64,
                returns,
                start.elapsed().as_secs_f64(),
                0.0,
                0.0,
                None,
                reporting_steps,
            ));
        }
    }
    Ok(records)
}

/// Population of gradient-only actors sharing one critic.
#[derive(Debug, Clone)]
pub struct MultiActorState {
    pub actors: Vec<ActorLearner>,
    pub learner: Learner,
    pub buffer: ReplayBuffer,
    /// Fitness of each actor in the latest round.
    pub last_fitness: Vec<f64>,
    pub round: u64,
}

impl MultiActorState {
    /// Actors are sampled around a random mean actor exactly like a CEM
    /// initial population.
    pub fn new(config: &HybridConfig, seed: u64) -> Result<Self> {
        let state = LoopState::new(config, seed)?;
        let learner = state.learner.ok_or_else(|| Error::config("algo", "multi-actor needs a critic"))?;
        let mut rng = stream_rng(seed, Stream::Sampling, 0);
        let actors = state
            .dist
            .sample_population(config.n_actors, &mut rng)
            .into_iter()
            .map(|g| ActorLearner::new(NetParams(g), learner.config.actor_lr))
            .collect();
        Ok(MultiActorState {
            actors,
            learner,
            buffer: state.buffer.expect("critic implies buffer"),
            last_fitness: vec![f64::NEG_INFINITY; config.n_actors],
            round: 0,
        })
    }
}

/// Round statistics of [`multi_actor_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundSummary {
    pub env_steps: u64,
    pub critic_batches: usize,
    pub actor_batches: usize,
}

/// Evaluates every actor (pushing transitions), then gives each its pro-rata
/// gradient budget against the shared critic. No selection, no sampling.
pub fn multi_actor_step(state: &mut MultiActorState, config: &HybridConfig, seed: u64) -> Result<RoundSummary> {
    let env = episodic_env(config)?;
    let spec = state.learner.actor_spec.clone();
    let n = state.actors.len();
    if n == 0 {
        return Err(Error::InvalidArgument("multi-actor needs at least one actor".into()));
    }
    let mut env_steps = 0;
    for (i, actor) in state.actors.iter().enumerate() {
        let mut rng = stream_rng(seed, Stream::Evaluation, state.round * n as u64 + i as u64);
        let ev = evaluate(&spec, &actor.params.0, &env, 1, &mut rng, config.action_noise_std)?;
        state.last_fitness[i] = ev.mean_return;
        env_steps += ev.env_steps;
        for t in ev.transitions {
            state.buffer.push(t);
        }
    }
    let (mut critic_batches, mut actor_batches) = gradient_budget(env_steps, 2 * n, config.budget_mode);
    if let Some(cap) = config.gradient_cap {
        critic_batches = critic_batches.min(cap);
        actor_batches = actor_batches.min(cap);
    }
    let mut train_rng = stream_rng(seed, Stream::Training, state.round);
    for actor in &mut state.actors {
        state
            .learner
            .train_actor_phase(actor, &state.buffer, critic_batches, actor_batches, &mut train_rng)?;
    }
    state.round += 1;
    Ok(RoundSummary {
        env_steps,
        critic_batches: critic_batches * n,
        actor_batches: actor_batches * n,
    })
}

fn run_multi_actor(config: &HybridConfig, seed: u64) -> Result<Vec<RunRecord>> {
    let start = Instant::now();
    let mut state = MultiActorState::new(config, seed)?;
    let spec = state.learner.actor_spec.clone();
    let mut records = Vec::new();
    let mut total_steps = 0;
    let mut next_report = config.report_interval;
    loop {
        let round = state.round;
        let summary = multi_actor_step(&mut state, config, seed).map_err(|e| e.at_generation(round))?;
        total_steps += summary.env_steps;
        let finished = total_steps >= config.max_steps;
        if total_steps >= next_report || finished {
            // report the actor that did best in this round's evaluation
            let best = state
                .last_fitness
                .iter()
                .enumerate()
                .fold(0, |b, (i, f)| if *f > state.last_fitness[b] { i } else { b });
            let (returns, reporting_steps) = report_returns(config, Some(&spec), &state.actors[best].params.0, seed)?;
            records.push(RunRecord::new(
                total_steps,
                records.len() as u64,
                returns,
                start.elapsed().as_secs_f64(),
                0.0,
                0.0,
                None,
                reporting_steps,
            ));
            while next_report <= total_steps {
                next_report += config.report_interval;
            }
        }
        if finished {
            break;
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk(algo: Algo) -> HybridConfig {
        HybridConfig {
            algo,
            actor_hidden: vec![8],
            critic_hidden: vec![8],
            learner: LearnerConfig {
                batch_size: 16,
                ..LearnerConfig::default()
            },
            max_steps: 3000,
            eval_episodes: 2,
            start_steps: 200,
            report_interval: 1000,
            ..HybridConfig::default()
        }
    }

    #[test]
    fn budget_examples() {
        assert_eq!(gradient_budget(10_000, 10, BudgetMode::PerText), (2000, 2000));
        assert_eq!(gradient_budget(10_000, 10, BudgetMode::PerPseudocode), (2000, 10_000));
        assert_eq!(gradient_budget(0, 10, BudgetMode::PerText), (0, 0));
        assert_eq!(gradient_budget(0, 10, BudgetMode::PerPseudocode), (0, 0));
        assert_eq!(gradient_budget(999, 10, BudgetMode::PerText), (199, 199));
    }

    #[test]
    fn algo_names_roundtrip() {
        for a in Algo::ALL {
            assert_eq!(a.name().parse::<Algo>().unwrap(), a);
        }
        assert_eq!("cem_td3".parse::<Algo>().unwrap(), Algo::CemTd3);
        assert!("erl".parse::<Algo>().is_err());
    }

    #[test]
    fn generation_zero_is_pure_cem() {
        let config = desk(Algo::CemTd3);
        let mut state = LoopState::new(&config, 3).unwrap();
        let s = run_generation(&mut state, &config).unwrap();
        assert_eq!((s.critic_batches, s.actor_batches), (0, 0));
        assert_eq!(state.actor_steps, 10 * 100);
        // the learning half was never moved
        let mut reference = LoopState::new(&HybridConfig { algo: Algo::Cem, ..config.clone() }, 3).unwrap();
        run_generation(&mut reference, &HybridConfig { algo: Algo::Cem, ..config }).unwrap();
        assert_eq!(state.dist, reference.dist);
    }

    #[test]
    fn second_generation_uses_previous_steps() {
        let config = desk(Algo::CemTd3);
        let mut state = LoopState::new(&config, 3).unwrap();
        run_generation(&mut state, &config).unwrap();
        let s = run_generation(&mut state, &config).unwrap();
        assert_eq!((s.critic_batches, s.actor_batches), (200, 200));
        assert_eq!(state.transitions_stored, 2000);
        assert_eq!(state.total_steps, 2000);
        assert!(state.population[..5].iter().all(|i| i.origin == Origin::GradientStepped));
        assert!(state.population[5..].iter().all(|i| i.origin == Origin::Sampled));
    }

    #[test]
    fn cem_ignores_rl_settings() {
        let a = HybridConfig { algo: Algo::Cem, max_steps: 2000, ..desk(Algo::Cem) };
        let mut b = a.clone();
        b.learner.gamma = 0.5;
        b.critic_hidden = vec![3, 3];
        b.budget_mode = BudgetMode::PerPseudocode;
        assert_eq!(
            run_experiment(&a, 5).unwrap().iter().map(|r| r.eval_mean).collect::<Vec<_>>(),
            run_experiment(&b, 5).unwrap().iter().map(|r| r.eval_mean).collect::<Vec<_>>()
        );
    }

    #[test]
    fn tiny_budget_runs_one_generation() {
        let config = HybridConfig { max_steps: 10, ..desk(Algo::Cem) };
        let records = run_experiment(&config, 1).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].total_steps, 1000);
    }

    #[test]
    fn mean_actor_changes_only_through_refit() {
        let config = desk(Algo::CemTd3);
        let mut state = LoopState::new(&config, 4).unwrap();
        for _ in 0..3 {
            let before = state.dist.clone();
            run_generation(&mut state, &config).unwrap();
            let elites = select_elites(&state.population, config.elite_count()).unwrap();
            let mut expected = before;
            expected.update(&elites, &EliteWeights::new(config.weight_scheme, 5).unwrap()).unwrap();
            assert_eq!(state.dist, expected);
        }
    }

    #[test]
    fn importance_mixing_reuses_without_steps() {
        let config = HybridConfig {
            algo: Algo::Cem,
            importance_mixing: true,
            task: "sphere".parse().unwrap(),
            sigma_init: 0.1,
            ..HybridConfig::default()
        };
        let mut state = LoopState::new(&config, 2).unwrap();
        let mut reused_total = 0.0;
        for _ in 0..30 {
            let before = state.total_steps;
            let s = run_generation(&mut state, &config).unwrap();
            let fresh = state.population.iter().filter(|i| i.origin != Origin::Reused).count() as u64;
            assert_eq!(state.total_steps - before, fresh);
            reused_total += s.reuse_fraction;
        }
        assert!(reused_total > 0.0);
    }

    #[test]
    fn multi_actor_budget_and_independence() {
        let config = HybridConfig { n_actors: 5, ..desk(Algo::MultiActorTd3) };
        let mut state = MultiActorState::new(&config, 9).unwrap();
        let r0 = multi_actor_step(&mut state, &config, 9).unwrap();
        assert_eq!(r0.env_steps, 500);
        assert_eq!(r0.critic_batches, 500);
        let r1 = multi_actor_step(&mut state, &config, 9).unwrap();
        assert_eq!(r1.critic_batches, 5 * 100);
        for i in 0..5 {
            for j in (i + 1)..5 {
                let d: f64 = state.actors[i]
                    .params
                    .0
                    .iter()
                    .zip(&state.actors[j].params.0)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum();
                assert!(d > 0.0);
            }
        }
    }

    #[test]
    fn baselines_record_on_interval() {
        for algo in [Algo::Td3, Algo::Ddpg, Algo::MultiActorTd3] {
            let records = run_experiment(&desk(algo), 1).unwrap();
            let steps: Vec<u64> = records.iter().map(|r| r.total_steps).collect();
            assert_eq!(steps, vec![1000, 2000, 3000], "{algo}");
            assert!(records.iter().all(|r| r.episode_returns.len() == 2));
        }
    }

    #[test]
    fn config_validation() {
        assert!(HybridConfig { pop_size: 7, ..HybridConfig::default() }.validate().is_err());
        assert!(HybridConfig { tau_cem: 1.5, ..HybridConfig::default() }.validate().is_err());
        assert!(HybridConfig { algo: Algo::Td3, task: "sphere".parse().unwrap(), ..HybridConfig::default() }
            .validate()
            .is_err());
        assert!(HybridConfig::default().validate().is_ok());
    }
}
