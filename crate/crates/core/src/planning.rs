//! Cross-entropy-method planning over open-loop action sequences.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::curiosity::CuriosityObjective;
use crate::dynamics::{rollout, DynamicsModel};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CemConfig {
    pub horizon: usize,
    pub iterations: usize,
    pub candidates: usize,
    pub elite_fraction: f64,
    pub actions_per_replan: usize,
    /// Per action dimension `[lo, hi]`.
    pub action_bounds: Vec<[f64; 2]>,
    /// Initial per-dimension std; half the action range when unset.
    pub init_std: Option<f64>,
    /// Floor on the refit std as a fraction of the action range.
    pub min_std_fraction: f64,
}

impl Default for CemConfig {
    fn default() -> Self {
        Self {
            horizon: 10,
            iterations: 3,
            candidates: 200,
            elite_fraction: 0.05,
            actions_per_replan: 10,
            action_bounds: vec![[-1.0, 1.0]; 2],
            init_std: None,
            min_std_fraction: 0.05,
        }
    }
}

impl CemConfig {
    pub fn num_elites(&self) -> usize {
        (self.candidates as f64 * self.elite_fraction).floor() as usize
    }

    pub fn action_dim(&self) -> usize {
        self.action_bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.iterations == 0 {
            return bad("cem iterations must be positive".into());
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction <= 1.0) {
            return bad(format!("elite fraction {} must lie in (0, 1]", self.elite_fraction));
        }
        if self.num_elites() < 2 {
            return bad(format!(
                "{} candidates at elite fraction {} leave fewer than two elites",
                self.candidates, self.elite_fraction
            ));
        }
        if self.actions_per_replan == 0 || self.actions_per_replan > self.horizon {
            return bad(format!(
                "need 1 <= actions_per_replan ({}) <= horizon ({})",
                self.actions_per_replan, self.horizon
            ));
        }
        if self.action_bounds.is_empty() {
            return bad("action bounds are empty".into());
        }
        for [lo, hi] in &self.action_bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("invalid action bound [{lo}, {hi}]"));
            }
        }
        if let Some(s) = self.init_std {
            if !(s.is_finite() && s > 0.0) {
                return bad(format!("init_std {s} must be positive"));
            }
        }
        if !(self.min_std_fraction.is_finite() && self.min_std_fraction >= 0.0) {
            return bad(format!("min_std_fraction {} must be non-negative", self.min_std_fraction));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    /// `horizon x action_dim`.
    pub best_actions: Vec<Vec<f64>>,
    pub best_objective: f64,
    /// Mean elite cost per iteration.
    pub elite_trace: Vec<f64>,
    /// Best-ever cost after each iteration.
    pub best_trace: Vec<f64>,
}

/// Minimizes `objective` over bounded action sequences.
///
/// Samples are drawn from a diagonal Gaussian, clipped to the bounds, and
/// the Gaussian is refit to the elites each iteration. The best candidate
/// seen in any iteration is returned. Non-finite costs are discarded;
/// errors from the objective abort the search.
pub fn cem_optimize<F>(mut objective: F, config: &CemConfig, rng: &mut StreamRng) -> Result<PlanResult>
where
    F: FnMut(&[Vec<f64>]) -> Result<f64>,
{
    config.validate()?;
    let h = config.horizon;
    let bounds = &config.action_bounds;
    let a = bounds.len();
    let floor: Vec<f64> = bounds.iter().map(|[lo, hi]| config.min_std_fraction * (hi - lo)).collect();
    let mut mean: Vec<Vec<f64>> = vec![bounds.iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect(); h];
    let mut std: Vec<Vec<f64>> = vec![
        bounds
            .iter()
            .map(|[lo, hi]| config.init_std.unwrap_or(0.5 * (hi - lo)))
            .collect();
        h
    ];
    let n_elite = config.num_elites();
    let mut best: Option<(Vec<Vec<f64>>, f64)> = None;
    let mut elite_trace = Vec::with_capacity(config.iterations);
    let mut best_trace = Vec::with_capacity(config.iterations);

    for it in 0..config.iterations {
        let mut scored: Vec<(f64, Vec<Vec<f64>>)> = Vec::with_capacity(config.candidates);
        for _ in 0..config.candidates {
            let cand: Vec<Vec<f64>> = (0..h)
                .map(|t| {
                    (0..a)
                        .map(|d| {
                            let e: f64 = rng.sample(StandardNormal);
                            (mean[t][d] + std[t][d] * e).clamp(bounds[d][0], bounds[d][1])
                        })
                        .collect()
                })
                .collect();
            let cost = objective(&cand)?;
            if cost.is_finite() {
                scored.push((cost, cand));
            }
        }
        if scored.is_empty() {
            return Err(Error::Optimization(format!(
                "every candidate in CEM iteration {it} had a non-finite cost"
            )));
        }
        // stable sort keeps sampling order among ties
        scored.sort_by(|x, y| x.0.total_cmp(&y.0));
        let elites = &scored[..n_elite.min(scored.len())];
        if best.as_ref().is_none_or(|(_, c)| elites[0].0 < *c) {
            best = Some((elites[0].1.clone(), elites[0].0));
        }
        let ne = elites.len() as f64;
        elite_trace.push(elites.iter().map(|e| e.0).sum::<f64>() / ne);
        best_trace.push(best.as_ref().unwrap().1);
        for t in 0..h {
            for d in 0..a {
                let m = elites.iter().map(|e| e.1[t][d]).sum::<f64>() / ne;
                let v = elites.iter().map(|e| (e.1[t][d] - m) * (e.1[t][d] - m)).sum::<f64>() / ne;
                mean[t][d] = m;
                std[t][d] = v.sqrt().max(floor[d]);
            }
        }
    }
    let (best_actions, best_objective) = best.unwrap();
    Ok(PlanResult {
        best_actions,
        best_objective,
        elite_trace,
        best_trace,
    })
}

/// Plans from `context` with a curiosity objective.
///
/// The random kind takes its noise from a sub-stream seeded off `rng`, so
/// the candidate sampling sequence is the same for every kind.
pub fn plan_curious<M: DynamicsModel>(
    objective: &CuriosityObjective<'_, M>,
    context: &[Vec<f64>],
    config: &CemConfig,
    rng: &mut StreamRng,
) -> Result<PlanResult> {
    let mut noise = StreamRng::seed_from_u64(rng.random());
    cem_optimize(|a| objective.cost(context, a, &mut noise), config, rng)
}

/// Plans to maximize the summed `reward` over the member's predicted states.
pub fn plan_task<M, R>(reward: R, member: &M, context: &[Vec<f64>], config: &CemConfig, rng: &mut StreamRng) -> Result<PlanResult>
where
    M: DynamicsModel + ?Sized,
    R: Fn(&[f64]) -> f64,
{
    cem_optimize(
        |a| {
            let pred = rollout(member, context, a)?;
            Ok(-pred.means.iter().map(|s| reward(s)).sum::<f64>())
        },
        config,
        rng,
    )
}
