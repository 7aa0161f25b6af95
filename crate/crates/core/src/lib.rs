//! Cross-entropy method combined with off-policy actor-critic learning.
//!
//! Half of every CEM population receives gradient steps from a shared TD3 (or
//! DDPG) critic before evaluation; the search distribution is then refitted
//! to the best half. Pure CEM, TD3, DDPG and a multi-actor TD3 ablation are
//! available as baselines, with importance mixing as an optional
//! sample-reuse scheme.

pub mod cem;
pub mod envs;
pub mod error;
pub mod harness;
pub mod hybrid;
pub mod mixing;
pub mod net;
pub mod rl;
pub mod seeding;

pub use cem::{EliteWeights, Genome, Individual, Origin, SearchDistribution, WeightScheme};
pub use envs::{evaluate, BlackBoxKind, BlackBoxProblem, Env, Evaluation, Task};
pub use error::{Error, Result};
pub use harness::{aggregate, parse_config, AggregateCurve, RunRecord};
pub use hybrid::{gradient_budget, run_experiment, run_generation, Algo, BudgetMode, HybridConfig, LoopState};
pub use mixing::{importance_mix, GenerationArchive};
pub use net::{AdamState, HiddenActivation, NetParams, NetSpec, OutputActivation};
pub use rl::{ActorLearner, CriticVariant, Learner, LearnerConfig, ReplayBuffer, Transition};
pub use seeding::{derive_seed, stream_rng, Stream};
