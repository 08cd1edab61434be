use serde::{Deserialize, Serialize};

use super::explore::{context_of, explore_loop, RunRecord};
use super::{ExperimentConfig, ExploitConfig};
use crate::dynamics::{DynamicsEnsemble, DynamicsModel, Episode};
use crate::envs::{task_reward, EnvConfig, Environment, OracleModel, Task};
use crate::error::{Error, Result};
use crate::planning::plan_task;
use crate::rng::Streams;

/// Mean real-environment reward per task and their average.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskScores {
    pub label: String,
    pub seed: u64,
    pub rewards: Vec<(Task, f64)>,
    pub average: f64,
}

impl TaskScores {
    pub fn reward(&self, task: Task) -> Option<f64> {
        self.rewards.iter().find(|(t, _)| *t == task).map(|(_, r)| *r)
    }
}

/// Runs each task for `cfg.episodes` receding-horizon episodes planned with
/// `model` and executed in `env`. The evaluation streams depend only on
/// the seed, so every model for a seed faces the same noise.
pub fn evaluate_tasks<M: DynamicsModel + ?Sized>(
    model: &M,
    env: &dyn Environment,
    cfg: &ExploitConfig,
    context_len: usize,
    seed: u64,
) -> Result<Vec<(Task, f64)>> {
    let streams = Streams::new(seed).child("exploit", 0);
    let mut out = Vec::with_capacity(cfg.tasks.len());
    for &task in &cfg.tasks {
        task_reward(task, &env.initial_state())?;
        let reward = |s: &[f64]| task_reward(task, s).unwrap_or(f64::NAN);
        let mut total = 0.0;
        for e in 0..cfg.episodes as u64 {
            let mut plan_rng = streams.indexed(&format!("plan_{}", task.name()), e);
            let mut noise = streams.indexed(&format!("env_{}", task.name()), e);
            let mut s = env.initial_state();
            let mut ep = Episode::new(s.clone());
            while ep.len() < cfg.episode_length {
                let plan = plan_task(reward, model, &context_of(&ep, context_len), &cfg.cem, &mut plan_rng)?;
                for a in plan.best_actions.iter().take(cfg.cem.actions_per_replan) {
                    if ep.len() == cfg.episode_length {
                        break;
                    }
                    s = env.step(&s, a, &mut noise)?;
                    total += reward(&s);
                    ep.push(a.clone(), s.clone());
                }
            }
        }
        out.push((task, total / cfg.episodes as f64));
    }
    Ok(out)
}

fn scores(label: &str, seed: u64, rewards: Vec<(Task, f64)>) -> TaskScores {
    let average = rewards.iter().map(|(_, r)| r).sum::<f64>() / rewards.len() as f64;
    TaskScores {
        label: label.to_string(),
        seed,
        rewards,
        average,
    }
}

fn check_env(config: &ExperimentConfig) -> Result<Box<dyn Environment>> {
    if !matches!(config.env, EnvConfig::Locomotion(_)) {
        return Err(Error::Config("explore-then-exploit needs the locomotion environment".into()));
    }
    config.env.build()
}

/// Explores with the configured method, then freezes member 0 and plans
/// each downstream task with it.
pub fn explore_then_exploit(config: &ExperimentConfig, seed: u64) -> Result<(TaskScores, RunRecord)> {
    let env = check_env(config)?;
    let outcome = explore_loop(config, seed)?;
    let rewards = evaluate_tasks(outcome.ensemble.member(0), env.as_ref(), &config.exploit, config.context_len, seed)?;
    Ok((scores(config.method.name(), seed, rewards), outcome.record))
}

/// The same evaluation with the freshly initialized, untrained model.
pub fn exploit_floor(config: &ExperimentConfig, seed: u64) -> Result<TaskScores> {
    let env = check_env(config)?;
    let ensemble = DynamicsEnsemble::new(
        env.state_dim(),
        env.action_dim(),
        &config.ensemble_config(),
        &Streams::new(seed).child("ensemble", 0),
    )?;
    let rewards = evaluate_tasks(ensemble.member(0), env.as_ref(), &config.exploit, config.context_len, seed)?;
    Ok(scores("floor", seed, rewards))
}

/// The same evaluation planned with the true noise-free dynamics.
pub fn exploit_ceiling(config: &ExperimentConfig, seed: u64) -> Result<TaskScores> {
    let env = check_env(config)?;
    let oracle = OracleModel::new(env.as_ref());
    let rewards = evaluate_tasks(&oracle, env.as_ref(), &config.exploit, config.context_len, seed)?;
    Ok(scores("ceiling", seed, rewards))
}
