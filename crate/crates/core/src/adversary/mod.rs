//! The trajectory discriminator and the joint model/discriminator game.

mod checkpoint;
mod discriminator;
mod joint;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, CheckpointManifest, DiscriminatorMeta, NetworkEntry,
    CHECKPOINT_SCHEMA, MANIFEST_FILE,
};
pub use discriminator::{
    logistic, DiscStep, Discriminator, DiscriminatorConfig, TrajectoryScorer, LOGIT_CLAMP,
};
pub use joint::{
    joint_train, model_adv_loss, AdversarialWeights, CombinedLoss, JointConfig, JointRecord,
    TrainingSet,
};

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::dynamics::{
        DynamicsEnsemble, Episode, EnsembleConfig, MemberStreams, Normalizer, ProbabilisticModel,
        Trajectory,
    };
    use crate::nn::{gradient_check, AdamConfig};
    use crate::rng::Streams;

    const C: usize = 1;
    const H: usize = 3;

    /// Episodes of s' = 0.9 s + 0.1 a (S = A = 2) under uniform random actions.
    fn linear_episodes(seed: u64, count: usize, len: usize) -> Vec<Episode> {
        let mut rng = Streams::new(seed).stream("episodes");
        (0..count)
            .map(|_| {
                let mut s: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
                let mut e = Episode::new(s.clone());
                for _ in 0..len {
                    let a: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
                    s = s.iter().zip(&a).map(|(x, u)| 0.9 * x + 0.1 * u).collect();
                    e.push(a, s.clone());
                }
                e
            })
            .collect()
    }

    fn member(seed: u64) -> ProbabilisticModel {
        let mut rng = Streams::new(seed).stream("member");
        ProbabilisticModel::new(2, 2, &[16, 16], AdamConfig::with_learning_rate(1e-4), &mut rng).unwrap()
    }

    fn disc(seed: u64) -> Discriminator {
        let cfg = DiscriminatorConfig {
            hidden: vec![16, 16],
            ..DiscriminatorConfig::default()
        };
        Discriminator::new(C, H, 2, 2, &cfg, &mut Streams::new(seed).stream("disc")).unwrap()
    }

    fn setup(seed: u64) -> (ProbabilisticModel, Discriminator, Vec<Trajectory>) {
        let set = TrainingSet::from_episodes(&linear_episodes(seed, 2, 8), C, H);
        let n = Normalizer::fit(&set.transitions).unwrap();
        let mut m = member(seed);
        m.set_normalizer(n.clone()).unwrap();
        let mut d = disc(seed);
        d.set_normalization(&n).unwrap();
        (m, d, set.windows[..6].to_vec())
    }

    #[test]
    fn zero_gan_weight_is_mean_absolute_error() {
        let (m, d, batch) = setup(1);
        let w = AdversarialWeights {
            gan_weight: 0.0,
            l1_weight: 1.0,
        };
        let (loss, _) = model_adv_loss(&d, &m, &batch, w).unwrap();
        let mut sum = 0.0;
        let mut n = 0.0;
        for t in &batch {
            let p = m.rollout(&t.context, &t.actions).unwrap();
            for (pr, hr) in p.means.iter().zip(&t.future) {
                for (a, b) in pr.iter().zip(hr) {
                    sum += (a - b).abs();
                    n += 1.0;
                }
            }
        }
        assert!((loss.total - sum / n).abs() < 1e-12);
    }

    #[test]
    fn perfect_model_has_zero_l1() {
        let (m, d, batch) = setup(2);
        let perfect: Vec<Trajectory> = batch
            .iter()
            .map(|t| t.with_future(m.rollout(&t.context, &t.actions).unwrap().means))
            .collect();
        let (loss, _) = model_adv_loss(&d, &m, &perfect, AdversarialWeights::default()).unwrap();
        assert_eq!(loss.l1, 0.0);
    }

    #[test]
    fn combined_loss_gradient_matches_finite_differences() {
        for seed in 0..20 {
            let (m, d, batch) = setup(10 + seed);
            // a large adversarial weight makes the discriminator path dominate the check
            for w in [AdversarialWeights::default(), AdversarialWeights { gan_weight: 0.5, l1_weight: 1.0 }] {
                let (_, g) = model_adv_loss(&d, &m, &batch, w).unwrap();
                let mut probe = m.clone();
                let report = gradient_check(
                    |p| {
                        probe.net_mut().set_flat(p).unwrap();
                        model_adv_loss(&d, &probe, &batch, w).unwrap().0.total
                    },
                    &m.net().to_flat(),
                    &g.to_flat(),
                    1e-4,
                )
                .unwrap();
                assert!(report.passed, "seed {seed} {w:?}: {report:?}");
            }
        }
    }

    #[test]
    fn combined_step_does_not_increase_batch_loss() {
        for seed in 0..20 {
            let (mut m, d, batch) = setup(100 + seed);
            let w = AdversarialWeights::default();
            let before_disc = d.checksum();
            let (before, g) = model_adv_loss(&d, &m, &batch, w).unwrap();
            m.apply_gradient(&g).unwrap();
            let (after, _) = model_adv_loss(&d, &m, &batch, w).unwrap();
            assert!(after.total <= before.total, "seed {seed}: {} -> {}", before.total, after.total);
            assert_eq!(d.checksum(), before_disc);
        }
    }

    fn ensemble(k: usize, seed: u64, lr: f64) -> DynamicsEnsemble {
        let cfg = EnsembleConfig {
            size: k,
            hidden: vec![32, 32],
            adam: AdamConfig::with_learning_rate(lr),
            member_streams: MemberStreams::Distinct,
        };
        DynamicsEnsemble::new(2, 2, &cfg, &Streams::new(seed)).unwrap()
    }

    #[test]
    fn history_has_one_record_per_batch() {
        let set = TrainingSet::from_episodes(&linear_episodes(3, 4, 12), C, H);
        let mut e = ensemble(2, 3, 1e-3);
        let mut d = disc(3);
        let cfg = JointConfig {
            epochs: 3,
            batch_size: 8,
            ..JointConfig::default()
        };
        let h = joint_train(&mut e, &mut d, &set, &cfg, &Streams::new(3)).unwrap();
        assert_eq!(set.windows.len(), 40);
        assert_eq!(h.len(), 3 * 5);
        // fakes alternate between members
        assert_eq!(h[0].member, 0);
        assert_eq!(h[1].member, 1);
        assert!(joint_train(&mut e, &mut d, &TrainingSet::default(), &cfg, &Streams::new(3)).is_err());
    }

    #[test]
    fn accuracy_is_measured_on_full_batches() {
        // 6 windows with batch size 8: batches are topped up by cycling
        let set = TrainingSet::from_episodes(&linear_episodes(4, 1, 8), C, H);
        assert_eq!(set.windows.len(), 6);
        let mut e = ensemble(1, 4, 1e-3);
        let mut d = disc(4);
        let cfg = JointConfig {
            epochs: 4,
            batch_size: 8,
            ..JointConfig::default()
        };
        for r in joint_train(&mut e, &mut d, &set, &cfg, &Streams::new(4)).unwrap() {
            let scaled = r.disc_accuracy * 16.0;
            assert!((scaled - scaled.round()).abs() < 1e-9, "{}", r.disc_accuracy);
        }
    }

    #[test]
    fn zero_gan_weight_decouples_model_from_discriminator() {
        let set = TrainingSet::from_episodes(&linear_episodes(5, 3, 12), C, H);
        let cfg = JointConfig {
            epochs: 3,
            batch_size: 8,
            weights: AdversarialWeights {
                gan_weight: 0.0,
                l1_weight: 1.0,
            },
            combined_loss: true,
        };
        let run = |disc_seed: u64, threshold: f64| {
            let mut e = ensemble(2, 5, 1e-3);
            let mut d = disc(disc_seed);
            d.set_training_threshold(threshold);
            let h = joint_train(&mut e, &mut d, &set, &cfg, &Streams::new(5)).unwrap();
            let losses: Vec<(f64, f64)> = h.iter().map(|r| (r.model_nll, r.combined_loss)).collect();
            (losses, e.member(0).net().clone())
        };
        let (a, na) = run(1, 1.0);
        let (b, nb) = run(2, 0.0);
        assert_eq!(a, b);
        assert_eq!(na, nb);
    }

    #[test]
    fn linear_system_reaches_discriminator_equilibrium() {
        let set = TrainingSet::from_episodes(&linear_episodes(6, 16, 20), C, H);
        let mut e = ensemble(1, 6, 1e-3);
        let mut d = disc(6);
        let cfg = JointConfig {
            epochs: 40,
            batch_size: 32,
            ..JointConfig::default()
        };
        let h = joint_train(&mut e, &mut d, &set, &cfg, &Streams::new(6)).unwrap();
        let tail = &h[h.len() * 4 / 5..];
        let mean_acc = tail.iter().map(|r| r.disc_accuracy).sum::<f64>() / tail.len() as f64;
        let upper = d.training_threshold() + 0.1;
        assert!((0.4..=upper).contains(&mean_acc), "final accuracy {mean_acc}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let set = TrainingSet::from_episodes(&linear_episodes(7, 2, 10), C, H);
        let mut e = ensemble(2, 7, 1e-3);
        let mut d = disc(7);
        joint_train(&mut e, &mut d, &set, &JointConfig { epochs: 1, batch_size: 4, ..JointConfig::default() }, &Streams::new(7))
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_checkpoint(dir.path(), &e, Some(&d), 7).unwrap();
        assert_eq!(manifest.networks.len(), 3);
        let blob = std::fs::read(dir.path().join("member.1.bin")).unwrap();
        assert_eq!(blob.len(), e.member(1).net().num_params() * 8);
        let (e2, d2, m2) = load_checkpoint(dir.path(), AdamConfig::default(), &DiscriminatorConfig::default()).unwrap();
        assert_eq!(m2, manifest);
        assert_eq!(e2.len(), 2);
        for k in 0..2 {
            assert_eq!(e2.member(k).net(), e.member(k).net());
        }
        let d2 = d2.unwrap();
        let w = &set.windows[0];
        assert_eq!(d2.score_trajectory(w).unwrap(), d.score_trajectory(w).unwrap());
    }
}
