use rand::Rng;
use serde::{Deserialize, Serialize};

use super::explore::{planned_episode, random_episode};
use super::{ExperimentConfig, Method};
use crate::adversary::{joint_train, Discriminator, JointConfig, TrainingSet};
use crate::dynamics::{DynamicsEnsemble, DynamicsModel, ProbabilisticModel, Transition};
use crate::envs::{make_transfer_pair, Environment, Maze};
use crate::error::{Error, Result};
use crate::rng::Streams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferRow {
    pub seed: u64,
    pub samples: usize,
    pub curious_l2: f64,
    pub random_l2: f64,
    /// `100 (random - curious) / random`.
    pub improvement_pct: f64,
}

/// Held-out domain-B transitions: positions uniform over free space,
/// velocities uniform in `[-speed, speed]`, actions uniform in bounds, and
/// noise-free next states.
pub fn control_dataset(env: &Maze, size: usize, speed: f64, seed: u64) -> Result<Vec<Transition>> {
    let mut rng = Streams::new(seed).stream("control");
    let c = env.config();
    let mut out = Vec::with_capacity(size);
    while out.len() < size {
        let x = rng.random_range(0.0..c.width);
        let y = rng.random_range(0.0..c.height);
        if env.in_wall(x, y) {
            continue;
        }
        let s = vec![x, y, rng.random_range(-speed..=speed), rng.random_range(-speed..=speed)];
        let a: Vec<f64> = env.action_bounds().iter().map(|[lo, hi]| rng.random_range(*lo..=*hi)).collect();
        let next = env.step_with_noise(&s, &a, &[0.0, 0.0])?;
        out.push(Transition::new(s, a, next)?);
    }
    Ok(out)
}

/// Mean Euclidean distance between predicted means and next states.
pub fn one_step_l2<M: DynamicsModel + ?Sized>(model: &M, data: &[Transition]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation transitions"));
    }
    let mut total = 0.0;
    for t in data {
        let p = model.predict_step(&t.state, &t.action)?;
        total += p.mean.iter().zip(&t.next_state).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    }
    Ok(total / data.len() as f64)
}

/// NLL fine-tuning of a copy of `model` for a fixed number of steps on
/// minibatches drawn with replacement. No data leaves the model unchanged.
pub fn fine_tune(
    model: &ProbabilisticModel,
    data: &[Transition],
    steps: usize,
    batch: usize,
    learning_rate: f64,
    streams: &Streams,
) -> Result<ProbabilisticModel> {
    let mut m = model.clone();
    if data.is_empty() {
        return Ok(m);
    }
    m.set_learning_rate(learning_rate);
    let mut rng = streams.stream("fine_tune");
    for _ in 0..steps {
        let b: Vec<&Transition> = (0..batch).map(|_| &data[rng.random_range(0..data.len())]).collect();
        m.nll_step(&b)?;
    }
    Ok(m)
}

fn collect(
    env: &dyn Environment,
    method: Method,
    model: &ProbabilisticModel,
    disc: &Discriminator,
    config: &ExperimentConfig,
    count: usize,
    streams: &Streams,
) -> Result<Vec<Transition>> {
    let mut out = Vec::with_capacity(count);
    let mut index = 0u64;
    while out.len() < count {
        let (ep, _) = planned_episode(
            env,
            method,
            std::slice::from_ref(model),
            Some(disc),
            &config.cem,
            config.episode_length,
            config.context_len,
            streams,
            index,
        )?;
        out.extend(ep.transitions());
        index += 1;
    }
    out.truncate(count);
    Ok(out)
}

/// Pre-trains a model and discriminator on random domain-A data, collects
/// domain-B transitions with the (frozen) adversarial planner and with the
/// random planner, fine-tunes a copy of the model on the first `N` of each
/// for every configured `N`, and scores both on a fixed domain-B control set.
pub fn domain_transfer_pipeline(config: &ExperimentConfig, seed: u64) -> Result<Vec<TransferRow>> {
    config.validate()?;
    let tc = &config.transfer;
    let (env_a, env_b) = make_transfer_pair();
    let streams = Streams::new(seed);

    let source = streams.child("source", 0);
    let episodes = (0..tc.source_episodes as u64)
        .map(|i| random_episode(&env_a, config.episode_length, &source, i))
        .collect::<Result<Vec<_>>>()?;
    let set = TrainingSet::from_episodes(&episodes, config.context_len, config.cem.horizon);
    let single = ExperimentConfig {
        ensemble_size: 1,
        ..config.clone()
    };
    let mut ensemble = DynamicsEnsemble::new(4, 2, &single.ensemble_config(), &streams.child("ensemble", 0))?;
    let mut disc = Discriminator::new(
        config.context_len,
        config.cem.horizon,
        4,
        2,
        &config.discriminator_config(),
        &mut streams.stream("discriminator"),
    )?;
    let joint = JointConfig {
        epochs: tc.source_epochs,
        batch_size: config.training.batch_size,
        weights: config.weights,
        combined_loss: true,
    };
    joint_train(&mut ensemble, &mut disc, &set, &joint, &streams.child("source_train", 0))?;
    let model = ensemble.member(0);

    let max_n = tc.sample_sizes.iter().copied().max().unwrap_or(0);
    let curious = collect(&env_b, Method::Adversarial, model, &disc, config, max_n, &streams.child("collect_curious", 0))?;
    let random = collect(&env_b, Method::Random, model, &disc, config, max_n, &streams.child("collect_random", 0))?;
    let control = control_dataset(&env_b, tc.control_size, tc.control_speed, tc.control_seed)?;

    let mut rows = Vec::with_capacity(tc.sample_sizes.len());
    for &n in &tc.sample_sizes {
        // both policies see the same minibatch index stream
        let ft = streams.child("fine_tune", n as u64);
        let tune = |data: &[Transition]| {
            fine_tune(model, data, tc.fine_tune_steps, tc.fine_tune_batch, tc.fine_tune_learning_rate, &ft)
        };
        let curious_l2 = one_step_l2(&tune(&curious[..n])?, &control)?;
        let random_l2 = one_step_l2(&tune(&random[..n])?, &control)?;
        rows.push(TransferRow {
            seed,
            samples: n,
            curious_l2,
            random_l2,
            improvement_pct: 100.0 * (random_l2 - curious_l2) / random_l2,
        });
    }
    Ok(rows)
}
