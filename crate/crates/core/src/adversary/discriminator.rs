use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Normalizer, Trajectory};
use crate::error::{check_len, Error, Result};
use crate::nn::{Activation, Adam, AdamConfig, Gradient, Mlp, Tape};

/// Logits are clamped to this magnitude so `log(1 - D)` stays finite.
pub const LOGIT_CLAMP: f64 = 30.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub hidden: Vec<usize>,
    pub adam: AdamConfig,
    /// Updates are skipped while batch accuracy exceeds this value.
    pub training_threshold: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            adam: AdamConfig::default(),
            training_threshold: 0.75,
        }
    }
}

/// Scores anything shaped like (context, actions, future).
pub trait TrajectoryScorer {
    fn score(&self, context: &[Vec<f64>], actions: &[Vec<f64>], future: &[Vec<f64>]) -> Result<f64>;
}

/// Outcome of one discriminator update attempt.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscStep {
    pub loss: f64,
    pub accuracy: f64,
    pub skipped: bool,
}

/// Binary realism classifier over flattened (context, actions, future).
///
/// Labels: real trajectories are 1, model rollouts are 0.
#[derive(Clone, Debug)]
pub struct Discriminator {
    net: Mlp,
    optim: Adam,
    training_threshold: f64,
    context_len: usize,
    horizon: usize,
    state_dim: usize,
    action_dim: usize,
    shift: Vec<f64>,
    scale: Vec<f64>,
}

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(
        context_len: usize,
        horizon: usize,
        state_dim: usize,
        action_dim: usize,
        config: &DiscriminatorConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if context_len == 0 || horizon == 0 {
            return Err(Error::Invalid("context length and horizon must be positive".into()));
        }
        let width = context_len * state_dim + horizon * (action_dim + state_dim);
        let mut sizes = vec![width];
        sizes.extend_from_slice(&config.hidden);
        sizes.push(1);
        let net = Mlp::new(&sizes, Activation::LeakyRelu, rng)?;
        Ok(Self {
            optim: Adam::new(&net, config.adam),
            net,
            training_threshold: config.training_threshold,
            context_len,
            horizon,
            state_dim,
            action_dim,
            shift: vec![0.0; width],
            scale: vec![1.0; width],
        })
    }

    pub fn input_width(&self) -> usize {
        self.net.input_dim()
    }

    pub fn context_len(&self) -> usize {
        self.context_len
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn training_threshold(&self) -> f64 {
        self.training_threshold
    }

    pub fn set_training_threshold(&mut self, threshold: f64) {
        self.training_threshold = threshold;
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn optimizer(&self) -> &Adam {
        &self.optim
    }

    pub fn input_shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn input_scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn set_input_scaling(&mut self, shift: Vec<f64>, scale: Vec<f64>) -> Result<()> {
        check_len("disc input shift", self.input_width(), shift.len())?;
        check_len("disc input scale", self.input_width(), scale.len())?;
        self.shift = shift;
        self.scale = scale;
        Ok(())
    }

    /// Standardizes state and action features with the dynamics statistics.
    pub fn set_normalization(&mut self, n: &Normalizer) -> Result<()> {
        check_len("disc normalizer state dim", self.state_dim, n.state_dim())?;
        check_len("disc normalizer action dim", self.action_dim, n.action_dim())?;
        let mut shift = Vec::with_capacity(self.input_width());
        let mut scale = Vec::with_capacity(self.input_width());
        for _ in 0..self.context_len {
            shift.extend_from_slice(&n.state_mean);
            scale.extend_from_slice(&n.state_std);
        }
        for _ in 0..self.horizon {
            shift.extend_from_slice(&n.action_mean);
            scale.extend_from_slice(&n.action_std);
        }
        for _ in 0..self.horizon {
            shift.extend_from_slice(&n.state_mean);
            scale.extend_from_slice(&n.state_std);
        }
        self.set_input_scaling(shift, scale)
    }

    /// Flattened, standardized network input.
    pub fn encode(
        &self,
        context: &[Vec<f64>],
        actions: &[Vec<f64>],
        future: &[Vec<f64>],
    ) -> Result<Vec<f64>> {
        check_len("disc context length", self.context_len, context.len())?;
        check_len("disc action horizon", self.horizon, actions.len())?;
        check_len("disc future horizon", self.horizon, future.len())?;
        let mut x = Vec::with_capacity(self.input_width());
        for c in context {
            check_len("disc context state", self.state_dim, c.len())?;
            x.extend_from_slice(c);
        }
        for a in actions {
            check_len("disc action", self.action_dim, a.len())?;
            x.extend_from_slice(a);
        }
        for h in future {
            check_len("disc future state", self.state_dim, h.len())?;
            x.extend_from_slice(h);
        }
        for ((v, s), k) in x.iter_mut().zip(&self.shift).zip(&self.scale) {
            *v = (*v - s) / k;
        }
        Ok(x)
    }

    pub fn logit(&self, context: &[Vec<f64>], actions: &[Vec<f64>], future: &[Vec<f64>]) -> Result<f64> {
        let x = self.encode(context, actions, future)?;
        let z = self.net.forward(&x)?[0];
        if !z.is_finite() {
            return Err(Error::NonFinite("discriminator logit"));
        }
        Ok(z.clamp(-LOGIT_CLAMP, LOGIT_CLAMP))
    }

    /// Realism score in (0, 1).
    pub fn score_trajectory(&self, t: &Trajectory) -> Result<f64> {
        self.score(&t.context, &t.actions, &t.future)
    }

    pub(crate) fn forward_tape(
        &self,
        context: &[Vec<f64>],
        actions: &[Vec<f64>],
        future: &[Vec<f64>],
    ) -> Result<Tape> {
        let x = self.encode(context, actions, future)?;
        self.net.forward_tape(&x)
    }

    /// Gradient of `output_grad * logit` with respect to the raw (unscaled)
    /// future entries, row-major `H x S`.
    pub(crate) fn future_input_grad(&self, tape: &Tape, logit_grad: f64) -> Result<Vec<f64>> {
        let mut scratch = Gradient::zeros_like(&self.net);
        let g = self.net.backward_tape(tape, &[logit_grad], &mut scratch)?;
        let start = self.context_len * self.state_dim + self.horizon * self.action_dim;
        Ok(g[start..]
            .iter()
            .zip(&self.scale[start..])
            .map(|(v, k)| v / k)
            .collect())
    }

    /// Fraction of real samples scored above 0.5 and fake samples below.
    pub fn accuracy(&self, real: &[Trajectory], fake: &[Trajectory]) -> Result<f64> {
        let mut correct = 0usize;
        for t in real {
            if self.logit(&t.context, &t.actions, &t.future)? > 0.0 {
                correct += 1;
            }
        }
        for t in fake {
            if self.logit(&t.context, &t.actions, &t.future)? < 0.0 {
                correct += 1;
            }
        }
        Ok(correct as f64 / (real.len() + fake.len()) as f64)
    }

    /// Mean binary cross-entropy (real = 1, fake = 0) and its gradient.
    pub fn bce_loss_and_grad(&self, real: &[Trajectory], fake: &[Trajectory]) -> Result<(f64, Gradient)> {
        if real.is_empty() || fake.is_empty() {
            return Err(Error::Empty("discriminator batch"));
        }
        let n = (real.len() + fake.len()) as f64;
        let mut grads = Gradient::zeros_like(&self.net);
        let mut total = 0.0;
        let labeled = real.iter().map(|t| (t, 1.0)).chain(fake.iter().map(|t| (t, 0.0)));
        for (t, y) in labeled {
            let tape = self.forward_tape(&t.context, &t.actions, &t.future)?;
            let raw = tape.output()[0];
            let z = raw.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
            // -[y ln s(z) + (1 - y) ln(1 - s(z))]
            total += y * softplus(-z) + (1.0 - y) * softplus(z);
            let dz = if raw.abs() <= LOGIT_CLAMP {
                (logistic(z) - y) / n
            } else {
                0.0
            };
            self.net.backward_tape(&tape, &[dz], &mut grads)?;
        }
        Ok((total / n, grads))
    }

    /// One descent step on the BCE, skipped while the pre-step accuracy
    /// exceeds the training threshold.
    pub fn train_step(&mut self, real: &[Trajectory], fake: &[Trajectory]) -> Result<DiscStep> {
        if real.is_empty() || fake.is_empty() {
            return Err(Error::Empty("discriminator batch"));
        }
        if real.len() != fake.len() {
            return Err(Error::shape("discriminator batch sizes", real.len(), fake.len()));
        }
        let accuracy = self.accuracy(real, fake)?;
        let (loss, grads) = self.bce_loss_and_grad(real, fake)?;
        let skipped = accuracy > self.training_threshold;
        if !skipped {
            self.optim.step(&mut self.net, &grads)?;
        }
        Ok(DiscStep {
            loss,
            accuracy,
            skipped,
        })
    }

    /// Order-sensitive digest of the parameters.
    pub fn checksum(&self) -> u64 {
        self.net
            .to_flat()
            .iter()
            .fold(0xcbf2_9ce4_8422_2325_u64, |h, v| {
                (h ^ v.to_bits()).wrapping_mul(0x0000_0100_0000_01b3)
            })
    }
}

impl TrajectoryScorer for Discriminator {
    fn score(&self, context: &[Vec<f64>], actions: &[Vec<f64>], future: &[Vec<f64>]) -> Result<f64> {
        Ok(logistic(self.logit(context, actions, future)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradient_check;
    use crate::rng::Streams;

    pub(crate) fn disc(seed: u64, threshold: f64, lr: f64) -> Discriminator {
        let mut rng = Streams::new(seed).stream("disc");
        let cfg = DiscriminatorConfig {
            hidden: vec![32, 32],
            adam: AdamConfig::with_learning_rate(lr),
            training_threshold: threshold,
        };
        Discriminator::new(1, 3, 2, 1, &cfg, &mut rng).unwrap()
    }

    /// Real futures follow a damped walk; fakes are the same futures shifted by 1.0.
    pub(crate) fn separable(seed: u64, n: usize) -> (Vec<Trajectory>, Vec<Trajectory>) {
        let mut rng = Streams::new(seed).stream("separable");
        let mut real = Vec::new();
        let mut fake = Vec::new();
        for _ in 0..n {
            let mut s = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let ctx = vec![s.clone()];
            let mut acts = Vec::new();
            let mut fut = Vec::new();
            for _ in 0..3 {
                let a = rng.random_range(-1.0..1.0);
                s = vec![0.9 * s[0] + 0.1 * a, 0.9 * s[1] - 0.1 * a];
                acts.push(vec![a]);
                fut.push(s.clone());
            }
            let shifted = fut.iter().map(|r| r.iter().map(|v| v + 1.0).collect()).collect();
            let t = Trajectory::new(ctx, acts, fut).unwrap();
            fake.push(t.with_future(shifted));
            real.push(t);
        }
        (real, fake)
    }

    #[test]
    fn input_width_is_context_actions_future() {
        let d = disc(1, 0.75, 1e-4);
        assert_eq!(d.input_width(), 2 + 3 + 3 * 2);
    }

    #[test]
    fn zero_output_layer_scores_one_half() {
        let mut d = disc(2, 0.75, 1e-4);
        d.net_mut().zero_output_layer();
        let (real, _) = separable(2, 3);
        for t in &real {
            assert_eq!(d.score_trajectory(t).unwrap(), 0.5);
        }
    }

    #[test]
    fn score_rejects_wrong_shapes() {
        let d = disc(3, 0.75, 1e-4);
        assert!(d.score(&[vec![0.0, 0.0]], &vec![vec![0.0]; 2], &vec![vec![0.0; 2]; 2]).is_err());
        assert!(d.score(&[vec![0.0; 3]], &vec![vec![0.0]; 3], &vec![vec![0.0; 2]; 3]).is_err());
    }

    #[test]
    fn extreme_logits_stay_strictly_inside_unit_interval() {
        let mut d = disc(4, 0.75, 1e-4);
        d.net_mut().zero_output_layer();
        let last = d.net().biases().len() - 1;
        let (real, _) = separable(4, 1);
        for b in [1e6, -1e6] {
            d.net_mut().biases_mut()[last][0] = b;
            let s = d.score_trajectory(&real[0]).unwrap();
            assert!(s > 0.0 && s < 1.0, "{s}");
        }
    }

    #[test]
    fn scores_are_independent_of_batch_order() {
        let d = disc(5, 0.75, 1e-4);
        let (real, _) = separable(5, 8);
        let fwd: Vec<f64> = real.iter().map(|t| d.score_trajectory(t).unwrap()).collect();
        let mut rev: Vec<f64> = real.iter().rev().map(|t| d.score_trajectory(t).unwrap()).collect();
        rev.reverse();
        assert_eq!(fwd, rev);
    }

    #[test]
    fn bce_gradient_matches_finite_differences() {
        for seed in 0..20 {
            let mut d = disc(10 + seed, 0.75, 1e-4);
            let (real, fake) = separable(seed, 4);
            let n = crate::dynamics::Normalizer {
                state_mean: vec![0.1, -0.2],
                state_std: vec![0.5, 0.7],
                action_mean: vec![0.0],
                action_std: vec![0.6],
                delta_std: vec![1.0, 1.0],
            };
            d.set_normalization(&n).unwrap();
            let (_, g) = d.bce_loss_and_grad(&real, &fake).unwrap();
            let mut probe = d.clone();
            let report = gradient_check(
                |p| {
                    probe.net_mut().set_flat(p).unwrap();
                    probe.bce_loss_and_grad(&real, &fake).unwrap().0
                },
                &d.net().to_flat(),
                &g.to_flat(),
                1e-4,
            )
            .unwrap();
            assert!(report.passed, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn threshold_rule_skips_accurate_batches() {
        let mut d = disc(6, 0.75, 1e-3);
        d.set_training_threshold(1.0);
        let (real, fake) = separable(6, 32);
        for _ in 0..500 {
            if d.train_step(&real, &fake).unwrap().accuracy >= 0.9 {
                break;
            }
        }
        assert!(d.accuracy(&real, &fake).unwrap() > 0.75);
        d.set_training_threshold(0.75);
        let before = d.checksum();
        let step = d.train_step(&real, &fake).unwrap();
        assert!(step.skipped);
        assert!(step.accuracy > 0.75);
        assert_eq!(d.checksum(), before);
    }

    #[test]
    fn separable_construction_is_learned() {
        let mut d = disc(7, 1.0, 1e-4);
        let (real, fake) = separable(7, 64);
        let mut acc = 0.0;
        for _ in 0..500 {
            acc = d.train_step(&real, &fake).unwrap().accuracy;
            if acc >= 0.95 {
                break;
            }
        }
        assert!(acc >= 0.95, "accuracy {acc}");
        let (real_t, fake_t) = separable(70, 16);
        let r: f64 = real_t.iter().map(|t| d.score_trajectory(t).unwrap()).sum::<f64>() / 16.0;
        let f: f64 = fake_t.iter().map(|t| d.score_trajectory(t).unwrap()).sum::<f64>() / 16.0;
        assert!(r > f, "real {r} fake {f}");
    }

    #[test]
    fn single_step_decreases_batch_loss() {
        for seed in 0..20 {
            let mut d = disc(100 + seed, 1.0, 1e-4);
            let (real, fake) = separable(seed, 16);
            let (before, _) = d.bce_loss_and_grad(&real, &fake).unwrap();
            let step = d.train_step(&real, &fake).unwrap();
            assert!(!step.skipped);
            let (after, _) = d.bce_loss_and_grad(&real, &fake).unwrap();
            assert!(after < before, "seed {seed}: {before} -> {after}");
        }
    }

    #[test]
    fn empty_or_unequal_batches_are_rejected() {
        let mut d = disc(8, 0.75, 1e-4);
        let (real, fake) = separable(8, 4);
        assert!(d.train_step(&[], &fake).is_err());
        assert!(d.train_step(&real, &fake[..2]).is_err());
    }
}
