use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::discriminator::{logistic, softplus, LOGIT_CLAMP};
use super::Discriminator;
use crate::dynamics::{DynamicsEnsemble, Normalizer, ProbabilisticModel, Trajectory, Transition};
use crate::error::{Error, Result};
use crate::nn::Gradient;
use crate::rng::Streams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialWeights {
    pub gan_weight: f64,
    pub l1_weight: f64,
}

impl Default for AdversarialWeights {
    fn default() -> Self {
        Self {
            gan_weight: 0.001,
            l1_weight: 1.0,
        }
    }
}

impl AdversarialWeights {
    pub fn validate(&self) -> Result<()> {
        if self.gan_weight < 0.0 || self.l1_weight < 0.0 || !self.gan_weight.is_finite() || !self.l1_weight.is_finite() {
            return Err(Error::Invalid(format!("loss weights must be finite and non-negative: {self:?}")));
        }
        Ok(())
    }
}

/// Breakdown of the model's combined loss on one batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CombinedLoss {
    pub total: f64,
    pub l1: f64,
    pub adversarial: f64,
}

/// `l1_weight * mean|h - ĥ| + gan_weight * mean log(1 - D(c, a, ĥ))` with
/// `ĥ` the member's rollout means, and its gradient with respect to the
/// member's parameters. The discriminator is not modified.
pub fn model_adv_loss(
    disc: &Discriminator,
    member: &ProbabilisticModel,
    batch: &[Trajectory],
    weights: AdversarialWeights,
) -> Result<(CombinedLoss, Gradient)> {
    if batch.is_empty() {
        return Err(Error::Empty("combined-loss batch"));
    }
    let b = batch.len() as f64;
    let mut grads = Gradient::zeros_like(member.net());
    let mut l1_sum = 0.0;
    let mut adv_sum = 0.0;
    for t in batch {
        let tape = member.rollout_tape(&t.context, &t.actions)?;
        let entries = (t.horizon() * t.state_dim()) as f64;
        let l1_scale = weights.l1_weight / (b * entries);
        let mut d_means: Vec<Vec<f64>> = tape
            .means
            .iter()
            .zip(&t.future)
            .map(|(p, h)| {
                p.iter()
                    .zip(h)
                    .map(|(pi, hi)| {
                        l1_sum += (hi - pi).abs() / entries;
                        let diff = pi - hi;
                        if diff > 0.0 {
                            l1_scale
                        } else if diff < 0.0 {
                            -l1_scale
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();

        let disc_tape = disc.forward_tape(&t.context, &t.actions, &tape.means)?;
        let raw = disc_tape.output()[0];
        let z = raw.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
        // ln(1 - s(z)) = -softplus(z)
        adv_sum += -softplus(z);
        if weights.gan_weight != 0.0 && raw.abs() <= LOGIT_CLAMP {
            let dz = -logistic(z) * weights.gan_weight / b;
            let g = disc.future_input_grad(&disc_tape, dz)?;
            for (row, chunk) in d_means.iter_mut().zip(g.chunks(t.state_dim())) {
                row.iter_mut().zip(chunk).for_each(|(d, v)| *d += v);
            }
        }
        member.rollout_backward(&tape, &d_means, &mut grads)?;
    }
    let l1 = l1_sum / b;
    let adversarial = adv_sum / b;
    Ok((
        CombinedLoss {
            total: weights.l1_weight * l1 + weights.gan_weight * adversarial,
            l1,
            adversarial,
        },
        grads,
    ))
}

/// Which model losses the joint schedule applies each batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub weights: AdversarialWeights,
    /// Apply the combined L1 + adversarial step after the NLL step. When
    /// false the discriminator is still trained but never feeds back.
    pub combined_loss: bool,
}

impl Default for JointConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            batch_size: 32,
            weights: AdversarialWeights::default(),
            combined_loss: true,
        }
    }
}

/// One batch of the joint schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointRecord {
    /// Mean pre-step NLL across members.
    pub model_nll: f64,
    /// Pre-step combined loss, NaN when the combined step is disabled.
    pub combined_loss: f64,
    pub disc_loss: f64,
    pub disc_accuracy: f64,
    pub disc_skipped: bool,
    /// Member that produced this batch's fakes.
    pub member: usize,
}

/// Training material extracted from a buffer.
#[derive(Clone, Debug, Default)]
pub struct TrainingSet {
    pub transitions: Vec<Transition>,
    pub windows: Vec<Trajectory>,
}

impl TrainingSet {
    pub fn from_episodes<'a>(
        episodes: impl IntoIterator<Item = &'a crate::dynamics::Episode>,
        context_len: usize,
        horizon: usize,
    ) -> Self {
        let mut set = TrainingSet::default();
        for e in episodes {
            set.transitions.extend(e.transitions());
            set.windows.extend(e.windows(context_len, horizon));
        }
        set
    }
}

/// Cycles through a shuffled index list, reshuffling when exhausted, so
/// every batch is full.
struct Cycler {
    idx: Vec<usize>,
    pos: usize,
    rng: crate::rng::StreamRng,
}

impl Cycler {
    fn new(idx: Vec<usize>, mut rng: crate::rng::StreamRng) -> Self {
        let mut idx = idx;
        idx.shuffle(&mut rng);
        Self { idx, pos: 0, rng }
    }

    fn take(&mut self, n: usize) -> Vec<usize> {
        (0..n)
            .map(|_| {
                if self.pos == self.idx.len() {
                    self.idx.shuffle(&mut self.rng);
                    self.pos = 0;
                }
                self.pos += 1;
                self.idx[self.pos - 1]
            })
            .collect()
    }
}

/// Alternating schedule: per batch, (1) an NLL step for every member on its
/// bootstrap stream, (2) a combined-loss step for the round-robin member,
/// (3) a discriminator step on real windows against that member's rollouts.
///
/// The shared normalizer is refit on the data first and copied into the
/// discriminator's input scaling.
pub fn joint_train(
    ensemble: &mut DynamicsEnsemble,
    disc: &mut Discriminator,
    data: &TrainingSet,
    config: &JointConfig,
    streams: &Streams,
) -> Result<Vec<JointRecord>> {
    if data.transitions.is_empty() || data.windows.is_empty() {
        return Err(Error::Empty("joint training buffer"));
    }
    if config.batch_size == 0 {
        return Err(Error::Invalid("batch size must be positive".into()));
    }
    config.weights.validate()?;
    let normalizer = Normalizer::fit(&data.transitions)?;
    ensemble.set_normalizer(&normalizer)?;
    disc.set_normalization(&normalizer)?;

    let n_trans = data.transitions.len();
    let k = ensemble.len();
    let mut member_batches: Vec<Cycler> = (0..k)
        .map(|m| {
            Cycler::new(
                ensemble.bootstrap_indices(n_trans, streams, m),
                ensemble.member_rng(streams, "batching", m),
            )
        })
        .collect();
    let mut windows = Cycler::new((0..data.windows.len()).collect(), streams.stream("windows"));
    let batches = data.windows.len().div_ceil(config.batch_size);
    let mut history = Vec::with_capacity(config.epochs * batches);
    let mut round_robin = 0usize;
    for _ in 0..config.epochs {
        for _ in 0..batches {
            let mut nll = 0.0;
            for (m, cycler) in member_batches.iter_mut().enumerate() {
                let batch: Vec<&Transition> = cycler
                    .take(config.batch_size)
                    .into_iter()
                    .map(|i| &data.transitions[i])
                    .collect();
                nll += ensemble.member_mut(m).nll_step(&batch)?;
            }
            let member_idx = round_robin % k;
            round_robin += 1;
            let real: Vec<Trajectory> = windows
                .take(config.batch_size)
                .into_iter()
                .map(|i| data.windows[i].clone())
                .collect();
            let combined_loss = if config.combined_loss {
                let (loss, grads) = model_adv_loss(disc, ensemble.member(member_idx), &real, config.weights)?;
                ensemble.member_mut(member_idx).apply_gradient(&grads)?;
                loss.total
            } else {
                f64::NAN
            };
            let member = ensemble.member(member_idx);
            let fake = real
                .iter()
                .map(|t| Ok(t.with_future(member.rollout(&t.context, &t.actions)?.means)))
                .collect::<Result<Vec<_>>>()?;
            let step = disc.train_step(&real, &fake)?;
            history.push(JointRecord {
                model_nll: nll / k as f64,
                combined_loss,
                disc_loss: step.loss,
                disc_accuracy: step.accuracy,
                disc_skipped: step.skipped,
                member: member_idx,
            });
        }
    }
    Ok(history)
}
