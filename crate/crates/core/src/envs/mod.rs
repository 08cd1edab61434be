//! Small continuous-control environments: a walled point-mass maze with a
//! coverage grid, a two-task locomotion system, and a maze transfer pair.

mod locomotion;
mod maze;

pub use locomotion::{task_reward, Locomotion, LocomotionConfig, Task};
pub use maze::{make_transfer_pair, CoverageGrid, Maze, MazeConfig, Rect};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicsModel, StepPrediction, LOG_VAR_MIN};
use crate::error::{check_len, Error, Result};

pub const ACTION_NOISE_STD: f64 = 0.02;

pub trait Environment: Send + Sync {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn action_bounds(&self) -> Vec<[f64; 2]>;
    fn action_noise_std(&self) -> f64;
    fn initial_state(&self) -> Vec<f64>;

    /// Deterministic transition for an action that already includes noise.
    /// The action is clipped to the bounds first.
    fn step_clipped(&self, state: &[f64], action: &[f64]) -> Vec<f64>;

    /// Transition given an explicit action-noise draw. Pure.
    fn step_with_noise(&self, state: &[f64], action: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
        check_len("env state", self.state_dim(), state.len())?;
        check_len("env action", self.action_dim(), action.len())?;
        check_len("env noise", self.action_dim(), noise.len())?;
        if state.iter().chain(action).chain(noise).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("env step input"));
        }
        let noisy: Vec<f64> = clip_action(action, &self.action_bounds())
            .iter()
            .zip(noise)
            .map(|(a, n)| a + n)
            .collect();
        Ok(self.step_clipped(state, &noisy))
    }

    fn sample_noise(&self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        let std = self.action_noise_std();
        (0..self.action_dim())
            .map(|_| std * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    fn step(&self, state: &[f64], action: &[f64], rng: &mut dyn rand::RngCore) -> Result<Vec<f64>> {
        let noise = self.sample_noise(rng);
        self.step_with_noise(state, action, &noise)
    }
}

pub fn clip_action(action: &[f64], bounds: &[[f64; 2]]) -> Vec<f64> {
    action.iter().zip(bounds).map(|(a, [lo, hi])| a.clamp(*lo, *hi)).collect()
}

/// Which environment an experiment runs on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvConfig {
    Maze(MazeConfig),
    Locomotion(LocomotionConfig),
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::Maze(MazeConfig::default())
    }
}

impl EnvConfig {
    pub fn build(&self) -> Result<Box<dyn Environment>> {
        Ok(match self {
            EnvConfig::Maze(c) => Box::new(Maze::new(c.clone())?),
            EnvConfig::Locomotion(c) => Box::new(Locomotion::new(c.clone())?),
        })
    }
}

/// The noise-free environment step exposed as a dynamics model with the
/// smallest admissible variance.
pub struct OracleModel<'a> {
    env: &'a dyn Environment,
}

impl<'a> OracleModel<'a> {
    pub fn new(env: &'a dyn Environment) -> Self {
        Self { env }
    }
}

impl DynamicsModel for OracleModel<'_> {
    fn state_dim(&self) -> usize {
        self.env.state_dim()
    }

    fn action_dim(&self) -> usize {
        self.env.action_dim()
    }

    fn predict_step(&self, state: &[f64], action: &[f64]) -> Result<StepPrediction> {
        let mean = self.env.step_with_noise(state, action, &vec![0.0; self.env.action_dim()])?;
        Ok(StepPrediction {
            log_var: vec![LOG_VAR_MIN; mean.len()],
            mean,
        })
    }
}
