
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, Method, ReplayBuffer};
use crate::adversary::{joint_train, Discriminator, JointConfig, TrajectoryScorer};
use crate::curiosity::{prediction_error_diagnostic, CuriosityObjective};
use crate::dynamics::{DynamicsEnsemble, DynamicsModel, Episode};
use crate::envs::{CoverageGrid, EnvConfig, Environment, Maze};
use crate::error::Result;
use crate::planning::{plan_curious, CemConfig};
use crate::rng::Streams;

/// Metrics logged after each round's training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub episodes: usize,
    pub transitions: usize,
    /// NaN outside the maze.
    pub coverage: f64,
    /// Mean best plan cost over the round's replans; NaN for the random bootstrap.
    pub plan_cost: f64,
    /// Member 0's rollout MSE on the round's new windows, before training on them.
    pub prediction_error: f64,
    /// Mean over the last training epoch.
    pub model_nll: f64,
    pub disc_accuracy: f64,
    pub disc_skip_rate: f64,
}

impl RoundRecord {
    pub const COLUMNS: [&'static str; 10] = [
        "round",
        "episodes",
        "transitions",
        "coverage",
        "plan_cost",
        "prediction_error",
        "model_nll",
        "disc_accuracy",
        "disc_skip_rate",
        "seed",
    ];
}

/// One executed environment step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub round: usize,
    pub episode: usize,
    pub step: usize,
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub seed: u64,
    pub config_hash: String,
    pub method: Method,
    pub ensemble_size: usize,
    pub rounds: Vec<RoundRecord>,
    pub steps: Vec<StepRecord>,
    /// Not part of the CSV output, which must be reproducible.
    pub wall_clock_secs: f64,
    /// Set when an ensemble objective ran with a single member.
    pub degenerate_objective: bool,
}

impl RunRecord {
    pub fn final_coverage(&self) -> f64 {
        self.rounds.last().map_or(f64::NAN, |r| r.coverage)
    }
}

/// Everything an exploration run leaves behind.
pub struct ExploreOutcome {
    pub record: RunRecord,
    pub ensemble: DynamicsEnsemble,
    pub discriminator: Discriminator,
    pub buffer: ReplayBuffer,
}

pub(crate) fn coverage_grid(env: &EnvConfig) -> Result<Option<CoverageGrid>> {
    Ok(match env {
        EnvConfig::Maze(c) => Some(Maze::new(c.clone())?.coverage_grid()),
        _ => None,
    })
}

pub(crate) fn random_episode(env: &dyn Environment, len: usize, streams: &Streams, index: u64) -> Result<Episode> {
    let mut act_rng = streams.indexed("random_actions", index);
    let mut noise = streams.indexed("env", index);
    let bounds = env.action_bounds();
    let mut s = env.initial_state();
    let mut ep = Episode::new(s.clone());
    for _ in 0..len {
        let a: Vec<f64> = bounds.iter().map(|[lo, hi]| act_rng.random_range(*lo..*hi)).collect();
        s = env.step(&s, &a, &mut noise)?;
        ep.push(a, s.clone());
    }
    Ok(ep)
}

/// Context of the `context_len` most recent states, padded at the start of
/// an episode by repeating the first state.
pub(crate) fn context_of(ep: &Episode, context_len: usize) -> Vec<Vec<f64>> {
    let n = ep.states.len();
    (0..context_len)
        .map(|i| {
            let back = context_len - 1 - i;
            ep.states[n.saturating_sub(1 + back)].clone()
        })
        .collect()
}

/// Receding-horizon episode: plan, execute `actions_per_replan` actions in
/// the real environment, replan from the reached state.
#[allow(clippy::too_many_arguments)]
pub(crate) fn planned_episode<M: DynamicsModel>(
    env: &dyn Environment,
    method: Method,
    members: &[M],
    scorer: Option<&dyn TrajectoryScorer>,
    cem: &CemConfig,
    len: usize,
    context_len: usize,
    streams: &Streams,
    index: u64,
) -> Result<(Episode, Vec<f64>)> {
    let mut plan_rng = streams.indexed("plan", index);
    let mut noise = streams.indexed("env", index);
    let mut s = env.initial_state();
    let mut ep = Episode::new(s.clone());
    let mut costs = Vec::new();
    while ep.len() < len {
        let noise_seed: u64 = plan_rng.random();
        let objective = CuriosityObjective::new(method.kind(), members, scorer, noise_seed)?;
        let plan = plan_curious(&objective, &context_of(&ep, context_len), cem, &mut plan_rng)?;
        costs.push(plan.best_objective);
        for a in plan.best_actions.iter().take(cem.actions_per_replan) {
            if ep.len() == len {
                break;
            }
            s = env.step(&s, a, &mut noise)?;
            ep.push(a.clone(), s.clone());
        }
    }
    Ok((ep, costs))
}

#[cfg(not(target_arch = "wasm32"))]
fn stopwatch() -> impl Fn() -> f64 {
    let t = std::time::Instant::now();
    move || t.elapsed().as_secs_f64()
}

/// wasm32-unknown-unknown has no clock; timing reads 0 there.
#[cfg(target_arch = "wasm32")]
fn stopwatch() -> impl Fn() -> f64 {
    || 0.0
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Runs the explore/update loop for one seed.
///
/// Round 0 executes one uniformly random episode; every later round plans
/// `episodes_per_round` episodes with the configured objective. After each
/// round the ensemble and discriminator are trained jointly on the whole
/// buffer, without resetting. Only the adversarial method feeds the
/// discriminator back into the model loss.
pub fn explore_loop(config: &ExperimentConfig, seed: u64) -> Result<ExploreOutcome> {
    let elapsed = stopwatch();
    config.validate()?;
    let env = config.env.build()?;
    let streams = Streams::new(seed);
    let (s_dim, a_dim) = (env.state_dim(), env.action_dim());
    let mut ensemble = DynamicsEnsemble::new(s_dim, a_dim, &config.ensemble_config(), &streams.child("ensemble", 0))?;
    let mut disc = Discriminator::new(
        config.context_len,
        config.cem.horizon,
        s_dim,
        a_dim,
        &config.discriminator_config(),
        &mut streams.stream("discriminator"),
    )?;
    let mut buffer = ReplayBuffer::new(config.buffer_capacity)?;
    let mut grid = coverage_grid(&config.env)?;
    let joint = JointConfig {
        epochs: config.training.epochs,
        batch_size: config.training.batch_size,
        weights: config.weights,
        combined_loss: config.method == Method::Adversarial,
    };
    let mut rounds = Vec::with_capacity(config.rounds + 1);
    let mut steps = Vec::new();
    let mut episode_index = 0u64;
    let degenerate = config.method.kind().uses_ensemble() && config.ensemble_size < 2;

    for round in 0..=config.rounds {
        let count = if round == 0 { 1 } else { config.episodes_per_round };
        let mut costs = Vec::new();
        let mut errors = Vec::new();
        for _ in 0..count {
            let ep = if round == 0 {
                random_episode(env.as_ref(), config.episode_length, &streams, episode_index)?
            } else {
                let (ep, c) = planned_episode(
                    env.as_ref(),
                    config.method,
                    ensemble.members(),
                    Some(&disc),
                    &config.cem,
                    config.episode_length,
                    config.context_len,
                    &streams,
                    episode_index,
                )?;
                costs.extend(c);
                for w in ep.windows(config.context_len, config.cem.horizon) {
                    errors.push(prediction_error_diagnostic(ensemble.member(0), &w)?);
                }
                ep
            };
            for (t, a) in ep.actions.iter().enumerate() {
                steps.push(StepRecord {
                    round,
                    episode: episode_index as usize,
                    step: t,
                    state: ep.states[t].clone(),
                    action: a.clone(),
                    next_state: ep.states[t + 1].clone(),
                });
            }
            if let Some(g) = grid.as_mut() {
                g.update(ep.states.iter().map(|s| s.as_slice()));
            }
            buffer.push(ep)?;
            episode_index += 1;
        }
        let set = buffer.training_set(config.context_len, config.cem.horizon);
        let history = joint_train(&mut ensemble, &mut disc, &set, &joint, &streams.child("train", round as u64))?;
        let per_epoch = history.len() / config.training.epochs;
        let last = &history[history.len() - per_epoch..];
        rounds.push(RoundRecord {
            round,
            episodes: buffer.num_episodes(),
            transitions: buffer.transitions(),
            coverage: grid.as_ref().map_or(f64::NAN, |g| g.ratio()),
            plan_cost: mean(costs),
            prediction_error: mean(errors),
            model_nll: mean(last.iter().map(|r| r.model_nll)),
            disc_accuracy: mean(last.iter().map(|r| r.disc_accuracy)),
            disc_skip_rate: mean(last.iter().map(|r| if r.disc_skipped { 1.0 } else { 0.0 })),
        });
    }
    Ok(ExploreOutcome {
        record: RunRecord {
            seed,
            config_hash: config.hash(),
            method: config.method,
            ensemble_size: config.ensemble_size,
            rounds,
            steps,
            wall_clock_secs: elapsed(),
            degenerate_objective: degenerate,
        },
        ensemble,
        discriminator: disc,
        buffer,
    })
}
