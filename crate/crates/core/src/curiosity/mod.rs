//! Intrinsic rewards that score a candidate (context, actions) pair before
//! acting.

mod renyi;

pub use renyi::{
    jensen_renyi_divergence, jr_monte_carlo_oracle, renyi2_entropy, renyi2_mixture_entropy, DiagGaussian,
    MonteCarloEstimate,
};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::adversary::TrajectoryScorer;
use crate::dynamics::{check_context, rollout, DynamicsModel, GaussianPrediction, Trajectory};
use crate::error::{Error, Result};
use crate::rng::Streams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CuriosityKind {
    Adversarial,
    JensenRenyi,
    TrajectoryVariance,
    Random,
}

impl CuriosityKind {
    pub const ALL: [CuriosityKind; 4] = [
        CuriosityKind::Adversarial,
        CuriosityKind::JensenRenyi,
        CuriosityKind::TrajectoryVariance,
        CuriosityKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CuriosityKind::Adversarial => "adversarial",
            CuriosityKind::JensenRenyi => "jensen_renyi",
            CuriosityKind::TrajectoryVariance => "trajectory_variance",
            CuriosityKind::Random => "random",
        }
    }

    pub fn uses_ensemble(self) -> bool {
        matches!(self, CuriosityKind::JensenRenyi | CuriosityKind::TrajectoryVariance)
    }
}

/// Discriminator score of the member's predicted future. Lower means the
/// prediction looks less real, which is what the planner seeks.
pub fn adversarial_score<S, M>(scorer: &S, member: &M, context: &[Vec<f64>], actions: &[Vec<f64>]) -> Result<f64>
where
    S: TrajectoryScorer + ?Sized,
    M: DynamicsModel + ?Sized,
{
    let pred = rollout(member, context, actions)?;
    scorer.score(context, actions, &pred.means)
}

fn member_rollouts<M: DynamicsModel>(
    members: &[M],
    context: &[Vec<f64>],
    actions: &[Vec<f64>],
) -> Result<Vec<GaussianPrediction>> {
    if members.is_empty() {
        return Err(Error::Empty("ensemble members"));
    }
    members.iter().map(|m| rollout(m, context, actions)).collect()
}

/// Sum over the horizon of the per-step Jensen-Rényi divergence between
/// the members' one-step Gaussians, each member rolled forward on its own
/// means.
pub fn jr_utility<M: DynamicsModel>(members: &[M], context: &[Vec<f64>], actions: &[Vec<f64>]) -> Result<f64> {
    let preds = member_rollouts(members, context, actions)?;
    let mut total = 0.0;
    for t in 0..actions.len() {
        let step = preds
            .iter()
            .map(|p| DiagGaussian::new(p.means[t].clone(), p.log_variances[t].iter().map(|lv| lv.exp()).collect()))
            .collect::<Result<Vec<_>>>()?;
        total += jensen_renyi_divergence(&step)?;
    }
    Ok(total)
}

/// Mean over steps and state dimensions of the across-member population
/// variance of sampled trajectories.
///
/// Every member draws the same standard-normal noise at each step, seeded
/// by `noise_seed`, so the score is invariant to member order and exactly 0
/// for identical members.
pub fn trajectory_variance_utility<M: DynamicsModel>(
    members: &[M],
    context: &[Vec<f64>],
    actions: &[Vec<f64>],
    noise_seed: u64,
) -> Result<f64> {
    let first = members.first().ok_or(Error::Empty("ensemble members"))?;
    check_context(first, context, actions)?;
    let s = first.state_dim();
    let mut rng = Streams::new(noise_seed).stream("trajectory_variance");
    let noise: Vec<Vec<f64>> = (0..actions.len())
        .map(|_| (0..s).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();

    let start = context.last().unwrap();
    let mut states: Vec<Vec<f64>> = vec![start.clone(); members.len()];
    let k = members.len() as f64;
    let mut total = 0.0;
    for (a, eps) in actions.iter().zip(&noise) {
        for (m, state) in members.iter().zip(states.iter_mut()) {
            let p = m.predict_step(state, a)?;
            for ((x, (mu, lv)), e) in state.iter_mut().zip(p.mean.iter().zip(&p.log_var)).zip(eps) {
                *x = mu + (0.5 * lv).exp() * e;
            }
        }
        for d in 0..s {
            let mean = states.iter().map(|x| x[d]).sum::<f64>() / k;
            total += states.iter().map(|x| (x[d] - mean) * (x[d] - mean)).sum::<f64>() / k;
        }
    }
    Ok(total / (actions.len() * s) as f64)
}

/// Mean squared error between the member's rollout means and a realized
/// future. Computed after acting, for logging only.
pub fn prediction_error_diagnostic<M: DynamicsModel + ?Sized>(member: &M, realized: &Trajectory) -> Result<f64> {
    let pred = rollout(member, &realized.context, &realized.actions)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, h) in pred.means.iter().zip(&realized.future) {
        for (a, b) in p.iter().zip(h) {
            sum += (a - b) * (a - b);
            n += 1;
        }
    }
    Ok(sum / n as f64)
}

/// A fresh uniform draw on [0, 1) per call.
pub fn random_utility<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

/// A curiosity objective bound to its trained artifacts.
pub struct CuriosityObjective<'a, M> {
    kind: CuriosityKind,
    members: &'a [M],
    scorer: Option<&'a dyn TrajectoryScorer>,
    noise_seed: u64,
}

impl<'a, M: DynamicsModel> CuriosityObjective<'a, M> {
    /// The adversarial kind scores with member 0 and requires a scorer.
    pub fn new(
        kind: CuriosityKind,
        members: &'a [M],
        scorer: Option<&'a dyn TrajectoryScorer>,
        noise_seed: u64,
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Empty("ensemble members"));
        }
        if kind == CuriosityKind::Adversarial && scorer.is_none() {
            return Err(Error::Invalid("the adversarial objective requires a discriminator".into()));
        }
        Ok(Self {
            kind,
            members,
            scorer,
            noise_seed,
        })
    }

    pub fn kind(&self) -> CuriosityKind {
        self.kind
    }

    pub fn members(&self) -> &'a [M] {
        self.members
    }

    /// Ensemble kinds with a single member score 0 everywhere.
    pub fn is_degenerate(&self) -> bool {
        self.kind.uses_ensemble() && self.members.len() < 2
    }

    /// The planner's cost for a candidate. Utilities are negated; the
    /// adversarial score is used as is; the random kind draws from `rng`.
    pub fn cost<R: Rng + ?Sized>(&self, context: &[Vec<f64>], actions: &[Vec<f64>], rng: &mut R) -> Result<f64> {
        match self.kind {
            CuriosityKind::Adversarial => {
                adversarial_score(self.scorer.unwrap(), &self.members[0], context, actions)
            }
            CuriosityKind::JensenRenyi => Ok(-jr_utility(self.members, context, actions)?),
            CuriosityKind::TrajectoryVariance => Ok(-trajectory_variance_utility(
                self.members,
                context,
                actions,
                self.noise_seed,
            )?),
            CuriosityKind::Random => Ok(random_utility(rng)),
        }
    }
}


#[cfg(test)]
mod tests {
    use super::stubs::{Constant, Shift};
    use super::*;
    use crate::dynamics::LOG_VAR_MIN;

    fn ca(h: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let actions = (0..h).map(|t| vec![0.1 * t as f64, -0.2]).collect();
        (vec![vec![0.5, -0.5]], actions)
    }

    struct Fixed(f64);

    impl TrajectoryScorer for Fixed {
        fn score(&self, _: &[Vec<f64>], _: &[Vec<f64>], _: &[Vec<f64>]) -> Result<f64> {
            Ok(self.0)
        }
    }

    /// Scores by the mean of the future, so the rollout must be forwarded.
    struct FutureMean;

    impl TrajectoryScorer for FutureMean {
        fn score(&self, _: &[Vec<f64>], _: &[Vec<f64>], f: &[Vec<f64>]) -> Result<f64> {
            Ok(f.iter().flatten().sum::<f64>() / f.iter().flatten().count() as f64)
        }
    }

    #[test]
    fn adversarial_score_scores_the_rollout() {
        let (c, a) = ca(3);
        assert_eq!(adversarial_score(&Fixed(0.5), &Shift(1.0), &c, &a).unwrap(), 0.5);
        let m = Constant {
            value: 0.25,
            log_var: 0.0,
            dims: (2, 2),
        };
        assert_eq!(adversarial_score(&FutureMean, &m, &c, &a).unwrap(), 0.25);
        let s1 = adversarial_score(&FutureMean, &Shift(1.0), &c, &a).unwrap();
        let s2 = adversarial_score(&FutureMean, &Shift(1.0), &c, &a).unwrap();
        assert_eq!(s1.to_bits(), s2.to_bits());
    }

    #[test]
    fn jr_utility_is_zero_for_identical_members() {
        let (c, a) = ca(4);
        assert!(jr_utility(&[Shift(1.0), Shift(1.0), Shift(1.0)], &c, &a).unwrap().abs() <= 1e-9);
        assert_eq!(jr_utility(&[Shift(1.0)], &c, &a).unwrap(), 0.0);
    }

    #[test]
    fn jr_utility_with_one_step_is_the_divergence() {
        let (c, a) = ca(1);
        let members = [Shift(1.0), Shift(3.0)];
        let step: Vec<DiagGaussian> = members
            .iter()
            .map(|m| DiagGaussian::from_prediction(&m.predict_step(&c[0], &a[0]).unwrap()).unwrap())
            .collect();
        let direct = jensen_renyi_divergence(&step).unwrap();
        assert_eq!(jr_utility(&members, &c, &a).unwrap(), direct);
        assert!(direct > 0.0);
    }

    #[test]
    fn trajectory_variance_hand_cases() {
        let (c, a) = ca(5);
        let konst = |value| Constant {
            value,
            log_var: LOG_VAR_MIN,
            dims: (2, 2),
        };
        assert_eq!(trajectory_variance_utility(&[Shift(1.0)], &c, &a, 1).unwrap(), 0.0);
        assert!(trajectory_variance_utility(&[konst(1.0), konst(1.0)], &c, &a, 1).unwrap() <= 1e-6);
        let u = trajectory_variance_utility(&[konst(0.0), konst(2.0)], &c, &a, 1).unwrap();
        assert!((u - 1.0).abs() < 1e-12, "{u}");
    }

    #[test]
    fn trajectory_variance_is_order_invariant_and_pure() {
        let (c, a) = ca(6);
        let m = [Shift(0.5), Shift(1.0), Shift(2.0)];
        let r = [Shift(2.0), Shift(0.5), Shift(1.0)];
        let u = trajectory_variance_utility(&m, &c, &a, 9).unwrap();
        let v = trajectory_variance_utility(&r, &c, &a, 9).unwrap();
        assert!(u > 0.0);
        assert!((u - v).abs() <= 1e-12 * u);
        assert_eq!(u.to_bits(), trajectory_variance_utility(&m, &c, &a, 9).unwrap().to_bits());
    }

    #[test]
    fn prediction_error_of_identity_model_is_mean_squared_displacement() {
        let identity = Shift(0.0);
        let future = vec![vec![0.6, -0.5], vec![0.8, -0.3]];
        let t = Trajectory::new(vec![vec![0.5, -0.5]], vec![vec![1.0, 0.0], vec![2.0, 2.0]], future).unwrap();
        let expected = (0.1f64.powi(2) + 0.0 + 0.3f64.powi(2) + 0.2f64.powi(2)) / 4.0;
        assert!((prediction_error_diagnostic(&identity, &t).unwrap() - expected).abs() < 1e-12);
        let perfect = t.with_future(rollout(&Shift(0.1), &t.context, &t.actions).unwrap().means);
        assert_eq!(prediction_error_diagnostic(&Shift(0.1), &perfect).unwrap(), 0.0);
    }

    #[test]
    fn random_utility_is_reproducible_and_centered() {
        let mut a = Streams::new(4).stream("cem");
        let mut b = Streams::new(4).stream("cem");
        let xs: Vec<f64> = (0..100_000).map(|_| random_utility(&mut a)).collect();
        let ys: Vec<f64> = (0..100_000).map(|_| random_utility(&mut b)).collect();
        assert_eq!(xs, ys);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((0.495..=0.505).contains(&mean), "{mean}");
        assert_ne!(xs[0], xs[1]);
    }

    #[test]
    fn objective_validation() {
        let m = [Shift(1.0)];
        assert!(CuriosityObjective::new(CuriosityKind::Adversarial, &m, None, 0).is_err());
        assert!(CuriosityObjective::<Shift>::new(CuriosityKind::Random, &[], None, 0).is_err());
        let jr = CuriosityObjective::new(CuriosityKind::JensenRenyi, &m, None, 0).unwrap();
        assert!(jr.is_degenerate());
        let (c, a) = ca(3);
        assert_eq!(jr.cost(&c, &a, &mut Streams::new(0).stream("x")).unwrap(), 0.0);
        let scorer = Fixed(0.3);
        let adv = CuriosityObjective::new(CuriosityKind::Adversarial, &m, Some(&scorer), 0).unwrap();
        assert!(!adv.is_degenerate());
        assert_eq!(adv.cost(&c, &a, &mut Streams::new(0).stream("x")).unwrap(), 0.3);
    }

    #[test]
    fn kind_names_round_trip_through_serde() {
        for k in CuriosityKind::ALL {
            let s = serde_json::to_string(&k).unwrap();
            assert_eq!(s, format!("\"{}\"", k.name()));
            assert_eq!(serde_json::from_str::<CuriosityKind>(&s).unwrap(), k);
        }
    }
}
