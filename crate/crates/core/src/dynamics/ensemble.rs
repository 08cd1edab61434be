use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{rollout, GaussianPrediction, Normalizer, ProbabilisticModel, Transition};
use crate::error::{Error, Result};
use crate::nn::AdamConfig;
use crate::rng::{StreamRng, Streams};

/// How member random streams are derived.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberStreams {
    /// Each member gets streams keyed by its index.
    #[default]
    Distinct,
    /// Every member uses member 0's streams (testing aid).
    Shared,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub size: usize,
    pub hidden: Vec<usize>,
    pub adam: AdamConfig,
    #[serde(default)]
    pub member_streams: MemberStreams,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            size: 1,
            hidden: vec![64, 64],
            adam: AdamConfig::default(),
            member_streams: MemberStreams::Distinct,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Train each member on a bootstrap resample of the buffer.
    pub bootstrap: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            bootstrap: true,
        }
    }
}

/// K independently initialized members sharing one normalizer.
#[derive(Clone, Debug)]
pub struct DynamicsEnsemble {
    members: Vec<ProbabilisticModel>,
    member_streams: MemberStreams,
}

impl DynamicsEnsemble {
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        config: &EnsembleConfig,
        streams: &Streams,
    ) -> Result<Self> {
        if config.size == 0 {
            return Err(Error::Invalid("ensemble size must be at least 1".into()));
        }
        let members = (0..config.size)
            .map(|k| {
                let mut rng = streams.indexed("init", stream_index(config.member_streams, k));
                ProbabilisticModel::new(state_dim, action_dim, &config.hidden, config.adam, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            members,
            member_streams: config.member_streams,
        })
    }

    pub fn from_members(members: Vec<ProbabilisticModel>) -> Result<Self> {
        let first = members.first().ok_or(Error::Empty("ensemble members"))?;
        if members
            .iter()
            .any(|m| m.net().layer_sizes() != first.net().layer_sizes())
        {
            return Err(Error::Invalid("ensemble members must share layer shapes".into()));
        }
        Ok(Self {
            members,
            member_streams: MemberStreams::Distinct,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[ProbabilisticModel] {
        &self.members
    }

    pub fn member(&self, k: usize) -> &ProbabilisticModel {
        &self.members[k]
    }

    pub fn member_mut(&mut self, k: usize) -> &mut ProbabilisticModel {
        &mut self.members[k]
    }

    pub fn normalizer(&self) -> &Normalizer {
        self.members[0].normalizer()
    }

    pub fn set_normalizer(&mut self, normalizer: &Normalizer) -> Result<()> {
        for m in &mut self.members {
            m.set_normalizer(normalizer.clone())?;
        }
        Ok(())
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        for m in &mut self.members {
            m.set_learning_rate(lr);
        }
    }

    pub fn state_dim(&self) -> usize {
        self.normalizer().state_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.normalizer().action_dim()
    }

    /// Stream for member `k`, honoring [`MemberStreams`].
    pub fn member_rng(&self, streams: &Streams, name: &str, k: usize) -> StreamRng {
        streams.indexed(name, stream_index(self.member_streams, k))
    }

    /// Bootstrap resample (with replacement, same size) for member `k`.
    pub fn bootstrap_indices(&self, n: usize, streams: &Streams, k: usize) -> Vec<usize> {
        let mut rng = self.member_rng(streams, "bootstrap", k);
        (0..n).map(|_| rng.random_range(0..n)).collect()
    }

    /// Refits the shared normalizer on `transitions`, then trains every
    /// member by minibatch NLL on its own bootstrap resample.
    ///
    /// Returns the mean pre-step loss of each epoch, per member.
    pub fn train(
        &mut self,
        transitions: &[Transition],
        config: &TrainConfig,
        streams: &Streams,
    ) -> Result<Vec<Vec<f64>>> {
        if transitions.is_empty() {
            return Err(Error::Empty("training buffer"));
        }
        if config.batch_size == 0 {
            return Err(Error::Invalid("batch size must be positive".into()));
        }
        let normalizer = Normalizer::fit(transitions)?;
        self.set_normalizer(&normalizer)?;
        let n = transitions.len();
        let mut history = Vec::with_capacity(self.len());
        for k in 0..self.len() {
            let mut idx = if config.bootstrap {
                self.bootstrap_indices(n, streams, k)
            } else {
                (0..n).collect()
            };
            let mut rng = self.member_rng(streams, "batching", k);
            let member = &mut self.members[k];
            let mut losses = Vec::with_capacity(config.epochs);
            for _ in 0..config.epochs {
                idx.shuffle(&mut rng);
                let mut sum = 0.0;
                let mut count = 0;
                for chunk in idx.chunks(config.batch_size) {
                    let batch: Vec<&Transition> = chunk.iter().map(|&i| &transitions[i]).collect();
                    sum += member.nll_step(&batch)?;
                    count += 1;
                }
                losses.push(sum / count as f64);
            }
            history.push(losses);
        }
        Ok(history)
    }

    /// One rollout per member, in member order.
    pub fn predict(
        &self,
        context: &[Vec<f64>],
        actions: &[Vec<f64>],
    ) -> Result<Vec<GaussianPrediction>> {
        self.members
            .iter()
            .map(|m| rollout(m, context, actions))
            .collect()
    }
}

fn stream_index(mode: MemberStreams, k: usize) -> u64 {
    match mode {
        MemberStreams::Distinct => k as u64,
        MemberStreams::Shared => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DynamicsModel;

    /// Samples from s' = 0.9 s + 0.1 a with S = A = 2.
    pub(crate) fn linear_data(seed: u64, n: usize) -> Vec<Transition> {
        let mut rng = Streams::new(seed).stream("linear");
        (0..n)
            .map(|_| {
                let s: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
                let a: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
                let next = s.iter().zip(&a).map(|(x, u)| 0.9 * x + 0.1 * u).collect();
                Transition::new(s, a, next).unwrap()
            })
            .collect()
    }

    fn config(size: usize, lr: f64) -> EnsembleConfig {
        EnsembleConfig {
            size,
            hidden: vec![32, 32],
            adam: AdamConfig::with_learning_rate(lr),
            member_streams: MemberStreams::Distinct,
        }
    }

    #[test]
    fn training_lowers_nll() {
        let data = linear_data(1, 256);
        let streams = Streams::new(1);
        let mut e = DynamicsEnsemble::new(2, 2, &config(1, 1e-4), &streams).unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 32,
            bootstrap: true,
        };
        let h = e.train(&data, &cfg, &streams).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h[0].len(), 200);
        assert!(h[0][199] < h[0][0], "{} vs {}", h[0][199], h[0][0]);
    }

    #[test]
    fn empty_buffer_is_rejected() {
        let streams = Streams::new(1);
        let mut e = DynamicsEnsemble::new(2, 2, &config(2, 1e-3), &streams).unwrap();
        assert!(e.train(&[], &TrainConfig::default(), &streams).is_err());
    }

    #[test]
    fn shared_streams_give_identical_members() {
        let data = linear_data(2, 64);
        let streams = Streams::new(2);
        let mut cfg = config(4, 1e-3);
        cfg.member_streams = MemberStreams::Shared;
        let mut e = DynamicsEnsemble::new(2, 2, &cfg, &streams).unwrap();
        e.train(&data, &TrainConfig { epochs: 3, ..TrainConfig::default() }, &streams)
            .unwrap();
        for m in e.members() {
            assert_eq!(m.net(), e.member(0).net());
        }
        let preds = e.predict(&[vec![0.1, 0.2]], &vec![vec![0.3, 0.4]; 3]).unwrap();
        assert!(preds.iter().all(|p| p == &preds[0]));
    }

    #[test]
    fn distinct_streams_give_distinct_members() {
        let data = linear_data(3, 64);
        let streams = Streams::new(3);
        let mut e = DynamicsEnsemble::new(2, 2, &config(3, 1e-3), &streams).unwrap();
        e.train(&data, &TrainConfig { epochs: 2, ..TrainConfig::default() }, &streams)
            .unwrap();
        assert_ne!(e.member(0).net(), e.member(1).net());
        assert_ne!(e.member(1).net(), e.member(2).net());
    }

    #[test]
    fn singleton_ensemble_predict_equals_rollout() {
        let streams = Streams::new(4);
        let e = DynamicsEnsemble::new(2, 2, &config(1, 1e-3), &streams).unwrap();
        let ctx = [vec![0.5, -0.5]];
        let acts = vec![vec![0.1, 0.1]; 4];
        let preds = e.predict(&ctx, &acts).unwrap();
        assert_eq!(preds, vec![rollout(e.member(0), &ctx, &acts).unwrap()]);
    }

    #[test]
    fn linear_system_is_learned_and_rolled_out() {
        let data = linear_data(5, 1024);
        let streams = Streams::new(5);
        let mut e = DynamicsEnsemble::new(2, 2, &config(1, 3e-3), &streams).unwrap();
        let cfg = TrainConfig {
            epochs: 150,
            batch_size: 32,
            bootstrap: false,
        };
        e.train(&data, &cfg, &streams).unwrap();
        let held_out = linear_data(6, 200);
        let m = e.member(0);
        let err: f64 = held_out
            .iter()
            .map(|t| {
                let p = m.predict_step(&t.state, &t.action).unwrap();
                p.mean
                    .iter()
                    .zip(&t.next_state)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .sum::<f64>()
            / held_out.len() as f64;
        assert!(err < 1e-2, "one-step L2 {err}");

        // Five-step open loop against the hand-iterated closed form.
        let mut truth = vec![0.4, -0.3];
        let acts = vec![vec![0.5, -0.5], vec![0.2, 0.1], vec![-0.4, 0.3], vec![0.0, 0.6], vec![0.3, -0.2]];
        let g = rollout(m, &[truth.clone()], &acts).unwrap();
        for (row, a) in g.means.iter().zip(&acts) {
            truth = truth.iter().zip(a).map(|(x, u)| 0.9 * x + 0.1 * u).collect();
            for (p, t) in row.iter().zip(&truth) {
                assert!((p - t).abs() < 1e-2, "{row:?} vs {truth:?}");
            }
        }
    }

    #[test]
    fn scaling_data_scales_predictions() {
        let data = linear_data(7, 128);
        let factors = [10.0, 0.25];
        let scaled: Vec<Transition> = data
            .iter()
            .map(|t| {
                let f = |v: &[f64]| v.iter().zip(&factors).map(|(x, k)| x * k).collect();
                Transition::new(f(&t.state), t.action.clone(), f(&t.next_state)).unwrap()
            })
            .collect();
        let streams = Streams::new(7);
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 16,
            bootstrap: true,
        };
        let mut a = DynamicsEnsemble::new(2, 2, &config(1, 1e-3), &streams).unwrap();
        let mut b = a.clone();
        a.train(&data, &cfg, &streams).unwrap();
        b.train(&scaled, &cfg, &streams).unwrap();
        let s = [0.3, -0.6];
        let u = [0.2, 0.9];
        let pa = a.member(0).predict_step(&s, &u).unwrap();
        let ss: Vec<f64> = s.iter().zip(&factors).map(|(x, k)| x * k).collect();
        let pb = b.member(0).predict_step(&ss, &u).unwrap();
        for ((x, y), k) in pa.mean.iter().zip(&pb.mean).zip(&factors) {
            assert!((x - y / k).abs() < 1e-6, "{x} vs {}", y / k);
        }
    }
}
