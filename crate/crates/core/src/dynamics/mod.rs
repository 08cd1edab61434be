//! Probabilistic one-step dynamics models, multi-step rollouts, and
//! bootstrap ensembles trained by Gaussian negative log-likelihood.

mod data;
mod ensemble;
mod model;

pub use data::{read_episodes_jsonl, write_episodes_jsonl, Episode, BUFFER_SCHEMA};
pub use ensemble::{DynamicsEnsemble, EnsembleConfig, MemberStreams, TrainConfig};
pub use model::{Normalizer, ProbabilisticModel, RolloutTape};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Log-variance bounds applied after every forward pass.
pub const LOG_VAR_MIN: f64 = -10.0;
pub const LOG_VAR_MAX: f64 = 4.0;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
}

impl Transition {
    pub fn new(state: Vec<f64>, action: Vec<f64>, next_state: Vec<f64>) -> Result<Self> {
        check_len("transition next_state", state.len(), next_state.len())?;
        Ok(Self {
            state,
            action,
            next_state,
        })
    }
}

/// A context / action-sequence / future triple.
///
/// `context` holds `C` states ending at the current state, `actions` the `H`
/// actions applied from the current state, and `future` the `H` states that
/// followed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub context: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub future: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(
        context: Vec<Vec<f64>>,
        actions: Vec<Vec<f64>>,
        future: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if context.is_empty() {
            return Err(Error::Empty("trajectory context"));
        }
        if actions.is_empty() {
            return Err(Error::Empty("trajectory actions"));
        }
        check_len("trajectory horizon", actions.len(), future.len())?;
        let s = context[0].len();
        let a = actions[0].len();
        for row in context.iter().chain(&future) {
            check_len("trajectory state row", s, row.len())?;
        }
        for row in &actions {
            check_len("trajectory action row", a, row.len())?;
        }
        Ok(Self {
            context,
            actions,
            future,
        })
    }

    pub fn context_len(&self) -> usize {
        self.context.len()
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn state_dim(&self) -> usize {
        self.context[0].len()
    }

    pub fn action_dim(&self) -> usize {
        self.actions[0].len()
    }

    pub fn current_state(&self) -> &[f64] {
        self.context.last().unwrap()
    }

    /// The same context and actions with a different future.
    pub fn with_future(&self, future: Vec<Vec<f64>>) -> Trajectory {
        Trajectory {
            context: self.context.clone(),
            actions: self.actions.clone(),
            future,
        }
    }
}

/// One-step diagonal Gaussian over the next state.
#[derive(Clone, Debug, PartialEq)]
pub struct StepPrediction {
    pub mean: Vec<f64>,
    pub log_var: Vec<f64>,
}

/// Per-step means and diagonal log-variances over a horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrediction {
    pub means: Vec<Vec<f64>>,
    pub log_variances: Vec<Vec<f64>>,
}

impl GaussianPrediction {
    pub fn horizon(&self) -> usize {
        self.means.len()
    }
}

/// Anything that maps a state and action to a one-step Gaussian.
pub trait DynamicsModel {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn predict_step(&self, state: &[f64], action: &[f64]) -> Result<StepPrediction>;
}

impl<T: DynamicsModel + ?Sized> DynamicsModel for &T {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn action_dim(&self) -> usize {
        (**self).action_dim()
    }
    fn predict_step(&self, state: &[f64], action: &[f64]) -> Result<StepPrediction> {
        (**self).predict_step(state, action)
    }
}

pub(crate) fn check_context<M: DynamicsModel + ?Sized>(
    model: &M,
    context: &[Vec<f64>],
    actions: &[Vec<f64>],
) -> Result<()> {
    if context.is_empty() {
        return Err(Error::Empty("rollout context"));
    }
    if actions.is_empty() {
        return Err(Error::Empty("rollout actions"));
    }
    for c in context {
        check_len("rollout context state", model.state_dim(), c.len())?;
    }
    for a in actions {
        check_len("rollout action", model.action_dim(), a.len())?;
    }
    Ok(())
}

/// Open-loop rollout from the last context state, feeding each predicted
/// mean back in as the next state. Returns exactly `actions.len()` rows.
pub fn rollout<M: DynamicsModel + ?Sized>(
    model: &M,
    context: &[Vec<f64>],
    actions: &[Vec<f64>],
) -> Result<GaussianPrediction> {
    check_context(model, context, actions)?;
    let mut state = context.last().unwrap().clone();
    let mut means = Vec::with_capacity(actions.len());
    let mut log_variances = Vec::with_capacity(actions.len());
    for a in actions {
        let step = model.predict_step(&state, a)?;
        state.clone_from(&step.mean);
        means.push(step.mean);
        log_variances.push(step.log_var);
    }
    Ok(GaussianPrediction {
        means,
        log_variances,
    })
}

/// Per-entry Gaussian negative log density.
pub fn gaussian_nll_entry(mean: f64, log_var: f64, target: f64) -> f64 {
    let r = target - mean;
    0.5 * (LN_2PI + log_var + r * r * (-log_var).exp())
}

/// Mean per-entry negative log density over all `H x S` entries.
pub fn nll_loss(prediction: &GaussianPrediction, target: &[Vec<f64>]) -> Result<f64> {
    Ok(nll_loss_grad(prediction, target)?.0)
}

/// [`nll_loss`] together with its gradient with respect to the means and
/// the log-variances.
pub fn nll_loss_grad(
    prediction: &GaussianPrediction,
    target: &[Vec<f64>],
) -> Result<(f64, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    check_len("nll horizon", prediction.means.len(), target.len())?;
    check_len(
        "nll log-variance horizon",
        prediction.means.len(),
        prediction.log_variances.len(),
    )?;
    if target.is_empty() {
        return Err(Error::Empty("nll target"));
    }
    let mut count = 0usize;
    for ((m, lv), t) in prediction.means.iter().zip(&prediction.log_variances).zip(target) {
        check_len("nll state", m.len(), t.len())?;
        check_len("nll log-variance", m.len(), lv.len())?;
        count += m.len();
    }
    let n = count as f64;
    let mut total = 0.0;
    let mut d_mean = Vec::with_capacity(target.len());
    let mut d_lv = Vec::with_capacity(target.len());
    for ((m, lv), t) in prediction.means.iter().zip(&prediction.log_variances).zip(target) {
        let mut dm = Vec::with_capacity(m.len());
        let mut dl = Vec::with_capacity(m.len());
        for ((&mi, &li), &ti) in m.iter().zip(lv).zip(t) {
            total += gaussian_nll_entry(mi, li, ti);
            let inv_var = (-li).exp();
            let r = ti - mi;
            dm.push(-r * inv_var / n);
            dl.push(0.5 * (1.0 - r * r * inv_var) / n);
        }
        d_mean.push(dm);
        d_lv.push(dl);
    }
    Ok((total / n, d_mean, d_lv))
}
