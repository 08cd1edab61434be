//! Order-2 Jensen-Rényi divergence of equal-weight diagonal Gaussian mixtures.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::dynamics::StepPrediction;
use crate::error::{check_len, Error, Result};
use crate::rng::Streams;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Diagonal Gaussian parameterized by variances.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagGaussian {
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        check_len("gaussian variance", mean.len(), var.len())?;
        if mean.is_empty() {
            return Err(Error::Empty("gaussian dimension"));
        }
        if var.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Invalid(format!("variances must be positive and finite: {var:?}")));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("gaussian mean"));
        }
        Ok(Self { mean, var })
    }

    pub fn from_prediction(p: &StepPrediction) -> Result<Self> {
        Self::new(p.mean.clone(), p.log_var.iter().map(|lv| lv.exp()).collect())
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn var(&self) -> &[f64] {
        &self.var
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.var)
            .zip(x)
            .map(|((m, v), xi)| -0.5 * (LN_2PI + v.ln() + (xi - m) * (xi - m) / v))
            .sum()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.var)
            .map(|(m, v)| {
                let e: f64 = rng.sample(StandardNormal);
                m + v.sqrt() * e
            })
            .collect()
    }
}

fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn check_components(components: &[DiagGaussian]) -> Result<usize> {
    let first = components.first().ok_or(Error::Empty("mixture components"))?;
    for c in components {
        check_len("mixture component dimension", first.dim(), c.dim())?;
    }
    Ok(first.dim())
}

/// `ln N(mu_i; mu_j, S_i + S_j)`, the pairwise overlap integral of two
/// Gaussian densities.
fn log_overlap(a: &DiagGaussian, b: &DiagGaussian) -> f64 {
    a.mean
        .iter()
        .zip(&a.var)
        .zip(b.mean.iter().zip(&b.var))
        .map(|((ma, va), (mb, vb))| {
            let s = va + vb;
            -0.5 * (LN_2PI + s.ln() + (ma - mb) * (ma - mb) / s)
        })
        .sum()
}

/// Rényi-2 entropy of one Gaussian: `(d/2) ln 4π + ½ ln|Σ|`.
pub fn renyi2_entropy(g: &DiagGaussian) -> f64 {
    -log_overlap(g, g)
}

/// Rényi-2 entropy of the equal-weight mixture of `components`.
pub fn renyi2_mixture_entropy(components: &[DiagGaussian]) -> Result<f64> {
    check_components(components)?;
    let k = components.len() as f64;
    let mut terms = Vec::with_capacity(components.len() * components.len());
    for a in components {
        for b in components {
            terms.push(log_overlap(a, b));
        }
    }
    Ok(2.0 * k.ln() - logsumexp(&terms))
}

/// Mixture entropy minus mean component entropy, both of order 2.
/// Zero for a single component or identical components.
pub fn jensen_renyi_divergence(components: &[DiagGaussian]) -> Result<f64> {
    let mix = renyi2_mixture_entropy(components)?;
    let mean_component = components.iter().map(renyi2_entropy).sum::<f64>() / components.len() as f64;
    Ok(mix - mean_component)
}

/// Sampling estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub standard_error: f64,
}

/// `-ln E_{x~p}[p(x)]` from samples, with a delta-method standard error.
fn renyi2_from_samples(log_p: impl Fn(&[f64]) -> f64, xs: &[Vec<f64>]) -> MonteCarloEstimate {
    let n = xs.len() as f64;
    let ps: Vec<f64> = xs.iter().map(|x| log_p(x).exp()).collect();
    let mean = ps.iter().sum::<f64>() / n;
    let var = ps.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (n - 1.0);
    MonteCarloEstimate {
        estimate: -mean.ln(),
        standard_error: var.sqrt() / (n.sqrt() * mean),
    }
}

/// Sampling oracle for [`jensen_renyi_divergence`], using
/// `∫p² = E_{x~p}[p(x)]` for the mixture and for each component, with
/// independent draws for each of the K + 1 estimates.
pub fn jr_monte_carlo_oracle(components: &[DiagGaussian], samples: usize, seed: u64) -> Result<MonteCarloEstimate> {
    check_components(components)?;
    if samples < 2 {
        return Err(Error::Invalid("the oracle needs at least two samples".into()));
    }
    let k = components.len();
    let streams = Streams::new(seed);
    let mut rng = streams.stream("mixture");
    let mix_samples: Vec<Vec<f64>> = (0..samples)
        .map(|_| components[rng.random_range(0..k)].sample(&mut rng))
        .collect();
    let mix = renyi2_from_samples(
        |x| {
            let lp: Vec<f64> = components.iter().map(|c| c.log_density(x)).collect();
            logsumexp(&lp) - (k as f64).ln()
        },
        &mix_samples,
    );
    let mut comp_sum = 0.0;
    let mut comp_var = 0.0;
    for (i, c) in components.iter().enumerate() {
        let mut rng = streams.indexed("component", i as u64);
        let xs: Vec<Vec<f64>> = (0..samples).map(|_| c.sample(&mut rng)).collect();
        let e = renyi2_from_samples(|x| c.log_density(x), &xs);
        comp_sum += e.estimate;
        comp_var += e.standard_error * e.standard_error;
    }
    let kf = k as f64;
    Ok(MonteCarloEstimate {
        estimate: mix.estimate - comp_sum / kf,
        standard_error: (mix.standard_error * mix.standard_error + comp_var / (kf * kf)).sqrt(),
    })
}
