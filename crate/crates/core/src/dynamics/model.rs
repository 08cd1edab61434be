use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    check_context, DynamicsModel, GaussianPrediction, StepPrediction, Transition, LOG_VAR_MAX,
    LOG_VAR_MIN,
};
use crate::error::{check_len, Error, Result};
use crate::nn::{Activation, Adam, AdamConfig, Gradient, Mlp, Tape};

const STD_FLOOR: f64 = 1e-6;

/// Per-dimension input and target scaling fitted on a transition buffer.
///
/// States and actions are standardized. State deltas are only scaled (not
/// centered), so a zero network output always means "state unchanged".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub state_mean: Vec<f64>,
    pub state_std: Vec<f64>,
    pub action_mean: Vec<f64>,
    pub action_std: Vec<f64>,
    pub delta_std: Vec<f64>,
}

fn mean_std<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut n = 0usize;
    let mut mean = vec![0.0; dim];
    for r in rows.clone() {
        n += 1;
        mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
    }
    let n = n.max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for r in rows {
        for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let std = var.iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
    (mean, std)
}

impl Normalizer {
    pub fn identity(state_dim: usize, action_dim: usize) -> Self {
        Self {
            state_mean: vec![0.0; state_dim],
            state_std: vec![1.0; state_dim],
            action_mean: vec![0.0; action_dim],
            action_std: vec![1.0; action_dim],
            delta_std: vec![1.0; state_dim],
        }
    }

    pub fn fit(transitions: &[Transition]) -> Result<Self> {
        let first = transitions.first().ok_or(Error::Empty("normalizer data"))?;
        let s = first.state.len();
        let a = first.action.len();
        for t in transitions {
            check_len("normalizer state", s, t.state.len())?;
            check_len("normalizer action", a, t.action.len())?;
            check_len("normalizer next_state", s, t.next_state.len())?;
        }
        let (state_mean, state_std) = mean_std(transitions.iter().map(|t| t.state.as_slice()), s);
        let (action_mean, action_std) =
            mean_std(transitions.iter().map(|t| t.action.as_slice()), a);
        let deltas: Vec<Vec<f64>> = transitions
            .iter()
            .map(|t| t.next_state.iter().zip(&t.state).map(|(n, c)| n - c).collect())
            .collect();
        let (_, delta_std) = mean_std(deltas.iter().map(Vec::as_slice), s);
        Ok(Self {
            state_mean,
            state_std,
            action_mean,
            action_std,
            delta_std,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_mean.len()
    }

    pub fn action_dim(&self) -> usize {
        self.action_mean.len()
    }

    pub(crate) fn encode_input(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(state.len() + action.len());
        x.extend(
            state
                .iter()
                .zip(&self.state_mean)
                .zip(&self.state_std)
                .map(|((v, m), s)| (v - m) / s),
        );
        x.extend(
            action
                .iter()
                .zip(&self.action_mean)
                .zip(&self.action_std)
                .map(|((v, m), s)| (v - m) / s),
        );
        x
    }
}

/// Residual probabilistic predictor: the network outputs a scaled state
/// delta and a log-variance per state dimension.
#[derive(Clone, Debug)]
pub struct ProbabilisticModel {
    net: Mlp,
    optim: Adam,
    normalizer: Normalizer,
}

/// Cached rollout for backpropagating a loss on the predicted means.
pub struct RolloutTape {
    pub means: Vec<Vec<f64>>,
    tapes: Vec<Tape>,
}

impl ProbabilisticModel {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        adam: AdamConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let mut sizes = vec![state_dim + action_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2 * state_dim);
        let net = Mlp::new(&sizes, Activation::Tanh, rng)?;
        Self::from_net(net, adam, Normalizer::identity(state_dim, action_dim))
    }

    pub fn from_net(net: Mlp, adam: AdamConfig, normalizer: Normalizer) -> Result<Self> {
        let s = normalizer.state_dim();
        let a = normalizer.action_dim();
        check_len("model input width", s + a, net.input_dim())?;
        check_len("model output width", 2 * s, net.output_dim())?;
        let optim = Adam::new(&net, adam);
        Ok(Self {
            net,
            optim,
            normalizer,
        })
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

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.optim.set_learning_rate(lr);
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn set_normalizer(&mut self, normalizer: Normalizer) -> Result<()> {
        check_len("normalizer state dim", self.state_dim(), normalizer.state_dim())?;
        check_len("normalizer action dim", self.action_dim(), normalizer.action_dim())?;
        self.normalizer = normalizer;
        Ok(())
    }

    fn decode(&self, state: &[f64], out: &[f64]) -> StepPrediction {
        let s = state.len();
        let mean = state
            .iter()
            .zip(&out[..s])
            .zip(&self.normalizer.delta_std)
            .map(|((x, d), sd)| x + sd * d)
            .collect();
        let log_var = out[s..]
            .iter()
            .zip(&self.normalizer.delta_std)
            .map(|(lv, sd)| {
                let lv = lv.clamp(LOG_VAR_MIN, LOG_VAR_MAX);
                (lv + 2.0 * sd.ln()).clamp(LOG_VAR_MIN, LOG_VAR_MAX)
            })
            .collect();
        StepPrediction { mean, log_var }
    }

    /// Mean NLL over a batch in normalized target units, with its gradient.
    pub fn nll_loss_and_grad(&self, batch: &[&Transition]) -> Result<(f64, Gradient)> {
        if batch.is_empty() {
            return Err(Error::Empty("nll batch"));
        }
        let s = self.state_dim();
        let mut grads = Gradient::zeros_like(&self.net);
        let mut total = 0.0;
        let scale = 1.0 / (batch.len() * s) as f64;
        let mut out_grad = vec![0.0; 2 * s];
        for t in batch {
            check_len("nll state", s, t.state.len())?;
            check_len("nll next_state", s, t.next_state.len())?;
            check_len("nll action", self.action_dim(), t.action.len())?;
            let tape = self.net.forward_tape(&self.normalizer.encode_input(&t.state, &t.action))?;
            let out = tape.output();
            for j in 0..s {
                let target = (t.next_state[j] - t.state[j]) / self.normalizer.delta_std[j];
                let raw = out[s + j];
                let lv = raw.clamp(LOG_VAR_MIN, LOG_VAR_MAX);
                let r = target - out[j];
                let inv_var = (-lv).exp();
                total += super::gaussian_nll_entry(out[j], lv, target);
                out_grad[j] = -r * inv_var * scale;
                out_grad[s + j] = if (LOG_VAR_MIN..=LOG_VAR_MAX).contains(&raw) {
                    0.5 * (1.0 - r * r * inv_var) * scale
                } else {
                    0.0
                };
            }
            self.net.backward_tape(&tape, &out_grad, &mut grads)?;
        }
        Ok((total * scale, grads))
    }

    /// One Adam step on the batch NLL; returns the pre-step loss.
    pub fn nll_step(&mut self, batch: &[&Transition]) -> Result<f64> {
        let (loss, grads) = self.nll_loss_and_grad(batch)?;
        self.apply_gradient(&grads)?;
        Ok(loss)
    }

    pub fn apply_gradient(&mut self, grads: &Gradient) -> Result<()> {
        self.optim.step(&mut self.net, grads)
    }

    /// Rollout of the means only, keeping what backpropagation needs.
    pub fn rollout_tape(&self, context: &[Vec<f64>], actions: &[Vec<f64>]) -> Result<RolloutTape> {
        check_context(self, context, actions)?;
        let s = self.state_dim();
        let mut state = context.last().unwrap().clone();
        let mut means = Vec::with_capacity(actions.len());
        let mut tapes = Vec::with_capacity(actions.len());
        for a in actions {
            let tape = self.net.forward_tape(&self.normalizer.encode_input(&state, a))?;
            let out = tape.output();
            for j in 0..s {
                state[j] += self.normalizer.delta_std[j] * out[j];
            }
            means.push(state.clone());
            tapes.push(tape);
        }
        Ok(RolloutTape { means, tapes })
    }

    /// Backpropagates `d_means` (one row per rollout step) through the
    /// recursive rollout, accumulating parameter gradients into `grads`.
    pub fn rollout_backward(
        &self,
        tape: &RolloutTape,
        d_means: &[Vec<f64>],
        grads: &mut Gradient,
    ) -> Result<()> {
        check_len("rollout backward horizon", tape.means.len(), d_means.len())?;
        let s = self.state_dim();
        let mut carry = vec![0.0; s];
        let mut out_grad = vec![0.0; 2 * s];
        for k in (0..tape.tapes.len()).rev() {
            check_len("rollout backward state", s, d_means[k].len())?;
            // gradient with respect to the state after step k
            for j in 0..s {
                carry[j] += d_means[k][j];
                out_grad[j] = carry[j] * self.normalizer.delta_std[j];
            }
            let in_grad = self.net.backward_tape(&tape.tapes[k], &out_grad, grads)?;
            for j in 0..s {
                carry[j] += in_grad[j] / self.normalizer.state_std[j];
            }
        }
        Ok(())
    }
}

impl DynamicsModel for ProbabilisticModel {
    fn state_dim(&self) -> usize {
        self.normalizer.state_dim()
    }

    fn action_dim(&self) -> usize {
        self.normalizer.action_dim()
    }

    fn predict_step(&self, state: &[f64], action: &[f64]) -> Result<StepPrediction> {
        check_len("predict state", self.state_dim(), state.len())?;
        check_len("predict action", self.action_dim(), action.len())?;
        let out = self.net.forward(&self.normalizer.encode_input(state, action))?;
        let pred = self.decode(state, &out);
        if pred.mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("predicted mean"));
        }
        Ok(pred)
    }
}

impl ProbabilisticModel {
    pub fn rollout(&self, context: &[Vec<f64>], actions: &[Vec<f64>]) -> Result<GaussianPrediction> {
        super::rollout(self, context, actions)
    }
}
