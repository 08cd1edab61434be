use serde::{Deserialize, Serialize};

use super::{Environment, ACTION_NOISE_STD};
use crate::error::{check_len, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocomotionConfig {
    pub friction: f64,
    /// Strength of the `sin(theta)` push on the linear velocity.
    pub coupling: f64,
    pub dt: f64,
    pub action_noise_std: f64,
}

impl Default for LocomotionConfig {
    fn default() -> Self {
        Self {
            friction: 0.1,
            coupling: 0.3,
            dt: 0.1,
            action_noise_std: ACTION_NOISE_STD,
        }
    }
}

/// State `(x, v, theta, omega)` with
/// `x' = v`, `v' = a1 - c v + k sin(theta)`, `theta' = omega`, `omega' = a2 - c omega`,
/// integrated with semi-implicit Euler.
#[derive(Clone, Debug, PartialEq)]
pub struct Locomotion {
    config: LocomotionConfig,
}

impl Locomotion {
    pub fn new(config: LocomotionConfig) -> Result<Self> {
        let c = &config;
        if !(c.dt.is_finite() && c.dt > 0.0) || !(c.friction >= 0.0) || !c.coupling.is_finite() || !(c.action_noise_std >= 0.0) {
            return Err(Error::Config(format!("invalid locomotion constants {config:?}")));
        }
        Ok(Self { config })
    }

    pub fn config(&self) -> &LocomotionConfig {
        &self.config
    }
}

impl Environment for Locomotion {
    fn state_dim(&self) -> usize {
        4
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn action_bounds(&self) -> Vec<[f64; 2]> {
        vec![[-1.0, 1.0]; 2]
    }

    fn action_noise_std(&self) -> f64 {
        self.config.action_noise_std
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![0.0; 4]
    }

    fn step_clipped(&self, s: &[f64], a: &[f64]) -> Vec<f64> {
        let LocomotionConfig {
            friction: c,
            coupling: k,
            dt,
            ..
        } = self.config;
        let v = s[1] + dt * (a[0] - c * s[1] + k * s[2].sin());
        let w = s[3] + dt * (a[1] - c * s[3]);
        vec![s[0] + dt * v, v, s[2] + dt * w, w]
    }
}

/// Downstream tasks on the locomotion system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Forward velocity.
    Run,
    /// Angular velocity.
    Flip,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Run, Task::Flip];

    pub fn name(self) -> &'static str {
        match self {
            Task::Run => "run",
            Task::Flip => "flip",
        }
    }
}

pub fn task_reward(task: Task, state: &[f64]) -> Result<f64> {
    check_len("locomotion state", 4, state.len())?;
    Ok(match task {
        Task::Run => state[1],
        Task::Flip => state[3],
    })
}
