//! Deterministic desk-scale evaluation targets.
//!
//! Every environment is a pure function of `(state, action)`; randomness only
//! enters through the seed passed to `reset`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

use crate::error::{check_len, Error, Result};
use crate::net::{NetParams, NetSpec};
use crate::rl::Transition;
use crate::seeding::Rng as StdRng;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub name: &'static str,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub horizon: usize,
    pub reward: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: Vec<f64>,
    pub reward: f64,
    /// Absorbing success; horizon truncation is handled by the rollout loop.
    pub terminal: bool,
    /// The action had at least one coordinate outside [-1, 1].
    pub clamped: bool,
}

/// Deceptive corridor constants.
pub mod corridor {
    /// Displacement per step at full action.
    pub const SPEED: f64 = 0.05;
    /// Position that pays the terminal bonus.
    pub const GOAL: f64 = 1.0;
    pub const BONUS: f64 = 100.0;
    /// Reward per step at full leftward action.
    pub const LEFT_REWARD: f64 = 0.1;
    /// Cost per step at full rightward action.
    pub const RIGHT_COST: f64 = 0.01;
}

const POINT_MASS_SPEED: f64 = 0.05;

const PENDULUM_DT: f64 = 0.05;
const PENDULUM_G: f64 = 10.0;
const PENDULUM_MAX_SPEED: f64 = 8.0;
const PENDULUM_MAX_TORQUE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Env {
    /// 2-D reacher: obs `[px, py, gx, gy]`, velocity action scaled by 0.05,
    /// reward `-|p - g|` after the move. Horizon 100.
    PointMass,
    /// Swing-up: obs `[cos θ, sin θ, θ̇]`, torque `2a`, reward
    /// `-(θ² + 0.1 θ̇² + 0.001 a²)` with θ wrapped to [-π, π). Horizon 200.
    Pendulum,
    /// 1-D corridor: leftward drift pays up to 0.1 per step, rightward motion
    /// costs up to 0.01 per step, reaching `corridor::GOAL` pays
    /// `corridor::BONUS` and ends the episode. Starts at the origin. Horizon 100.
    Deceptive,
    /// Test env: reward 1 every step, never terminal.
    Constant { horizon: usize },
}

fn wrap_angle(theta: f64) -> f64 {
    (theta + PI).rem_euclid(2.0 * PI) - PI
}

impl Env {
    pub fn spec(&self) -> EnvSpec {
        match *self {
            Env::PointMass => EnvSpec {
                name: "pointmass",
                obs_dim: 4,
                action_dim: 2,
                horizon: 100,
                reward: "negative distance to goal after the move",
            },
            Env::Pendulum => EnvSpec {
                name: "pendulum",
                obs_dim: 3,
                action_dim: 1,
                horizon: 200,
                reward: "-(theta^2 + 0.1 theta_dot^2 + 0.001 a^2)",
            },
            Env::Deceptive => EnvSpec {
                name: "deceptive",
                obs_dim: 1,
                action_dim: 1,
                horizon: 100,
                reward: "leftward drift pays, goal bonus needs sustained rightward motion",
            },
            Env::Constant { horizon } => EnvSpec {
                name: "constant",
                obs_dim: 1,
                action_dim: 1,
                horizon,
                reward: "1 per step",
            },
        }
    }

    pub fn reset(&self, seed: u64) -> Vec<f64> {
        let mut rng = StdRng::seed_from_u64(seed);
        match self {
            Env::PointMass => (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
            Env::Pendulum => {
                let theta: f64 = rng.random_range(-PI..PI);
                let theta_dot: f64 = rng.random_range(-1.0..1.0);
                vec![theta.cos(), theta.sin(), theta_dot]
            }
            Env::Deceptive | Env::Constant { .. } => vec![0.0],
        }
    }

    pub fn step(&self, state: &[f64], action: &[f64]) -> Result<StepOutcome> {
        let spec = self.spec();
        check_len("env state", spec.obs_dim, state.len())?;
        check_len("env action", spec.action_dim, action.len())?;
        let clamped = action.iter().any(|a| !(-1.0..=1.0).contains(a));
        let a: Vec<f64> = action.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
        let (next_state, reward, terminal) = match self {
            Env::PointMass => {
                let px = state[0] + POINT_MASS_SPEED * a[0];
                let py = state[1] + POINT_MASS_SPEED * a[1];
                let dist = ((px - state[2]).powi(2) + (py - state[3]).powi(2)).sqrt();
                (vec![px, py, state[2], state[3]], -dist, false)
            }
            Env::Pendulum => {
                let theta = state[1].atan2(state[0]);
                let theta_dot = state[2];
                let u = PENDULUM_MAX_TORQUE * a[0];
                let reward = -(wrap_angle(theta).powi(2) + 0.1 * theta_dot.powi(2) + 0.001 * a[0].powi(2));
                // unit mass and length; theta = 0 is upright
                let new_dot = (theta_dot + (3.0 * PENDULUM_G / 2.0 * theta.sin() + 3.0 * u) * PENDULUM_DT)
                    .clamp(-PENDULUM_MAX_SPEED, PENDULUM_MAX_SPEED);
                let new_theta = theta + new_dot * PENDULUM_DT;
                (vec![new_theta.cos(), new_theta.sin(), new_dot], reward, false)
            }
            Env::Deceptive => {
                let x = state[0] + corridor::SPEED * a[0];
                let drift = if a[0] < 0.0 {
                    -corridor::LEFT_REWARD * a[0]
                } else {
                    -corridor::RIGHT_COST * a[0]
                };
                if x >= corridor::GOAL {
                    (vec![x], drift + corridor::BONUS, true)
                } else {
                    (vec![x], drift, false)
                }
            }
            Env::Constant { .. } => (vec![0.0], 1.0, false),
        };
        Ok(StepOutcome {
            next_state,
            reward,
            terminal,
            clamped,
        })
    }
}

impl fmt::Display for Env {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.spec().name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlackBoxKind {
    Sphere,
    Rastrigin,
}

/// Direct fitness function, maximization convention (negated objective).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlackBoxProblem {
    pub kind: BlackBoxKind,
    pub dim: usize,
}

impl BlackBoxProblem {
    pub fn name(&self) -> &'static str {
        match self.kind {
            BlackBoxKind::Sphere => "sphere",
            BlackBoxKind::Rastrigin => "rastrigin",
        }
    }

    pub fn fitness(&self, x: &[f64]) -> Result<f64> {
        check_len("black-box genome", self.dim, x.len())?;
        let value = match self.kind {
            BlackBoxKind::Sphere => x.iter().map(|v| v * v).sum::<f64>(),
            BlackBoxKind::Rastrigin => {
                10.0 * x.len() as f64
                    + x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>()
            }
        };
        Ok(-value)
    }
}

/// What an experiment optimizes: an episodic environment or a direct fitness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Task {
    Episodic(Env),
    BlackBox(BlackBoxProblem),
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Episodic(e) => e.spec().name,
            Task::BlackBox(p) => p.name(),
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    /// Black-box problems parse with the default dimension 10.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "pointmass" => Task::Episodic(Env::PointMass),
            "pendulum" => Task::Episodic(Env::Pendulum),
            "deceptive" => Task::Episodic(Env::Deceptive),
            "sphere" => Task::BlackBox(BlackBoxProblem { kind: BlackBoxKind::Sphere, dim: 10 }),
            "rastrigin" => Task::BlackBox(BlackBoxProblem { kind: BlackBoxKind::Rastrigin, dim: 10 }),
            other => return Err(Error::config("env", format!("unknown environment `{other}`"))),
        })
    }
}

/// Result of one or more rollouts of a fixed actor.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub mean_return: f64,
    pub episode_returns: Vec<f64>,
    pub env_steps: u64,
    pub transitions: Vec<Transition>,
    /// Steps whose action had to be clamped.
    pub clamped_actions: u64,
}

/// Runs `n_episodes` rollouts of the actor `genome`, each reset from a seed
/// drawn from `rng`. Optional Gaussian action noise is added before clamping
/// to [-1, 1].
pub fn evaluate<R: Rng + ?Sized>(
    actor_spec: &NetSpec,
    genome: &[f64],
    env: &Env,
    n_episodes: usize,
    rng: &mut R,
    action_noise_std: f64,
) -> Result<Evaluation> {
    if n_episodes == 0 {
        return Err(Error::InvalidArgument("n_episodes must be >= 1".into()));
    }
    let spec = env.spec();
    check_len("actor input", spec.obs_dim, actor_spec.input_dim())?;
    check_len("actor output", spec.action_dim, actor_spec.output_dim())?;
    let params = NetParams::unflatten(actor_spec, genome.to_vec())?;
    let noise = if action_noise_std > 0.0 {
        Some(Normal::new(0.0, action_noise_std).map_err(|e| Error::InvalidArgument(format!("action noise: {e}")))?)
    } else {
        None
    };

    let mut returns = Vec::with_capacity(n_episodes);
    let mut transitions = Vec::with_capacity(n_episodes * spec.horizon);
    let mut env_steps = 0u64;
    let mut clamped_actions = 0u64;
    for _ in 0..n_episodes {
        let mut state = env.reset(rng.next_u64());
        let mut total = 0.0;
        for t in 0..spec.horizon {
            let mut action = actor_spec.forward(&params, &state)?;
            if let Some(noise) = &noise {
                for a in &mut action {
                    *a = (*a + noise.sample(rng)).clamp(-1.0, 1.0);
                }
            }
            let out = env.step(&state, &action)?;
            if out.next_state.iter().any(|v| !v.is_finite()) || !out.reward.is_finite() {
                return Err(Error::EnvBlowUp { step: t });
            }
            if out.clamped {
                clamped_actions += 1;
            }
            for a in &mut action {
                *a = a.clamp(-1.0, 1.0);
            }
            env_steps += 1;
            total += out.reward;
            let terminal = out.terminal;
            transitions.push(Transition {
                state: std::mem::take(&mut state),
                action,
                reward: out.reward,
                next_state: out.next_state.clone(),
                done: terminal,
            });
            state = out.next_state;
            if terminal {
                break;
            }
        }
        returns.push(total);
    }
    Ok(Evaluation {
        mean_return: returns.iter().sum::<f64>() / returns.len() as f64,
        episode_returns: returns,
        env_steps,
        transitions,
        clamped_actions,
    })
}
