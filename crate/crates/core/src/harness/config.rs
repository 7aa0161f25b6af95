//! `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors. The
//! `env` key is applied before everything else so `problem_dim` may appear
//! anywhere in the file.

use std::str::FromStr;

use crate::cem::WeightScheme;
use crate::envs::Task;
use crate::error::{Error, Result};
use crate::hybrid::{BudgetMode, HybridConfig};
use crate::net::HiddenActivation;

pub const KEYS: &[&str] = &[
    "algo",
    "env",
    "max_steps",
    "pop_size",
    "importance_mixing",
    "action_noise",
    "actor_nonlinearity",
    "actor_hidden",
    "critic_hidden",
    "sigma_init",
    "sigma_end",
    "tau_cem",
    "n_elites",
    "weights",
    "gamma",
    "tau",
    "actor_lr",
    "critic_lr",
    "batch_size",
    "policy_noise",
    "noise_clip",
    "policy_delay",
    "buffer_size",
    "budget_mode",
    "gradient_cap",
    "eval_episodes",
    "n_actors",
    "report_interval",
    "start_steps",
    "exploration_noise",
    "init_range",
    "problem_dim",
    "similarity_tol",
];

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn switch(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "1" | "yes" => Ok(true),
        "off" | "false" | "0" | "no" => Ok(false),
        _ => Err(Error::config(key, format!("expected on/off, got `{value}`"))),
    }
}

fn sizes(key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|s| num(key, s.trim())).collect()
}

impl HybridConfig {
    /// Applies one setting. Cross-field constraints are left to
    /// [`HybridConfig::validate`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "algo" => self.algo = value.parse()?,
            "env" => self.task = value.parse()?,
            "max_steps" => self.max_steps = num(key, value)?,
            "pop_size" => self.pop_size = num(key, value)?,
            "importance_mixing" => self.importance_mixing = switch(key, value)?,
            "action_noise" => self.action_noise_std = num(key, value)?,
            "actor_nonlinearity" => {
                self.actor_nonlinearity = match value {
                    "tanh" => HiddenActivation::Tanh,
                    "relu" => HiddenActivation::Relu,
                    _ => return Err(Error::config(key, format!("expected tanh or relu, got `{value}`"))),
                }
            }
            "actor_hidden" => self.actor_hidden = sizes(key, value)?,
            "critic_hidden" => self.critic_hidden = sizes(key, value)?,
            "sigma_init" => self.sigma_init = num(key, value)?,
            "sigma_end" => self.sigma_end = num(key, value)?,
            "tau_cem" => self.tau_cem = num(key, value)?,
            "n_elites" => self.n_elites = Some(num(key, value)?),
            "weights" => {
                self.weight_scheme = match value {
                    "uniform" => WeightScheme::Uniform,
                    "log_rank" | "logrank" => WeightScheme::LogRank,
                    _ => return Err(Error::config(key, format!("expected uniform or log_rank, got `{value}`"))),
                }
            }
            "gamma" => self.learner.gamma = num(key, value)?,
            "tau" => self.learner.tau = num(key, value)?,
            "actor_lr" => self.learner.actor_lr = num(key, value)?,
            "critic_lr" => self.learner.critic_lr = num(key, value)?,
            "batch_size" => self.learner.batch_size = num(key, value)?,
            "policy_noise" => self.learner.policy_noise = num(key, value)?,
            "noise_clip" => self.learner.noise_clip = num(key, value)?,
            "policy_delay" => self.learner.policy_delay = num(key, value)?,
            "buffer_size" => self.buffer_capacity = num(key, value)?,
            "budget_mode" => {
                self.budget_mode = match value {
                    "text" | "per_text" => BudgetMode::PerText,
                    "pseudocode" | "per_pseudocode" => BudgetMode::PerPseudocode,
                    _ => return Err(Error::config(key, format!("expected text or pseudocode, got `{value}`"))),
                }
            }
            "gradient_cap" => {
                self.gradient_cap = if value == "none" { None } else { Some(num(key, value)?) }
            }
            "eval_episodes" => self.eval_episodes = num(key, value)?,
            "n_actors" => self.n_actors = num(key, value)?,
            "report_interval" => self.report_interval = num(key, value)?,
            "start_steps" => self.start_steps = num(key, value)?,
            "exploration_noise" => self.exploration_noise = num(key, value)?,
            "init_range" => self.init_range = num(key, value)?,
            "problem_dim" => match &mut self.task {
                Task::BlackBox(p) => p.dim = num(key, value)?,
                Task::Episodic(e) => {
                    return Err(Error::config(key, format!("environment `{e}` has a fixed dimension")))
                }
            },
            "similarity_tol" => self.similarity_tol = num(key, value)?,
            _ => return Err(Error::UnknownKey(key.to_string())),
        }
        Ok(())
    }
}

/// Splits `key=value` (a `--set` argument or a config line).
pub fn split_assignment(line: &str) -> Result<(&str, &str)> {
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| Error::config(line.trim(), "expected `key = value`"))?;
    Ok((k.trim(), v.trim()))
}

/// Applies the assignments of a config text on top of `base`.
pub fn apply_config(base: HybridConfig, text: &str) -> Result<HybridConfig> {
    let mut pairs = Vec::new();
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        pairs.push(split_assignment(line)?);
    }
    let mut config = base;
    for (k, v) in pairs.iter().filter(|(k, _)| *k == "env") {
        config.set(k, v)?;
    }
    for (k, v) in pairs.iter().filter(|(k, _)| *k != "env") {
        config.set(k, v)?;
    }
    config.validate()?;
    Ok(config)
}

/// Parses a config text over the defaults and validates the result.
pub fn parse_config(text: &str) -> Result<HybridConfig> {
    apply_config(HybridConfig::default(), text)
}
