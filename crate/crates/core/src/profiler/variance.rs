//! Sampling variance of random versus stratified estimators.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{PlanError, Result};
use crate::par::Execution;
use crate::rng::{derive, seeded};

const WEIGHT_TOLERANCE: f64 = 1e-9;

fn check_weights(p: &[f64]) -> Result<()> {
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > WEIGHT_TOLERANCE || p.iter().any(|&w| w < 0.0) {
        return Err(PlanError::WeightsNotNormalized(s));
    }
    Ok(())
}

/// Variance of the plain mean of `n` uniformly drawn cases:
/// `(Σ p_k σ_k² + Σ p_k (μ_k − μ̄)²) / n`.
pub fn variance_random(p: &[f64], mu: &[f64], sigma2: &[f64], n: usize) -> Result<f64> {
    check_weights(p)?;
    let mean: f64 = p.iter().zip(mu).map(|(w, m)| w * m).sum();
    let within: f64 = p.iter().zip(sigma2).map(|(w, s)| w * s).sum();
    let between: f64 = p.iter().zip(mu).map(|(w, m)| w * (m - mean) * (m - mean)).sum();
    Ok((within + between) / n as f64)
}

/// Variance of the stratified mean with proportional allocation:
/// `Σ p_k σ_k² / n`.
pub fn variance_stratified(p: &[f64], sigma2: &[f64], n: usize) -> Result<f64> {
    check_weights(p)?;
    let within: f64 = p.iter().zip(sigma2).map(|(w, s)| w * s).sum();
    Ok(within / n as f64)
}

/// How a Monte-Carlo trial draws its `n` cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingStrategy {
    /// Each case picks its stratum with probability `p_k`.
    Random,
    /// Exactly `round(n p_k)` cases per stratum, combined as `Σ p_k x̄_k`.
    Stratified,
}

/// Empirical variance of the sample mean over `trials` simulated samples of
/// `n` normal cases drawn from the mixture.
pub fn simulate_mean_variance(
    exec: Execution,
    strategy: SamplingStrategy,
    p: &[f64],
    mu: &[f64],
    sigma2: &[f64],
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    check_weights(p)?;
    let normals: Vec<Normal<f64>> = mu
        .iter()
        .zip(sigma2)
        .map(|(&m, &s)| Normal::new(m, s.sqrt()).expect("finite parameters"))
        .collect();
    let cdf: Vec<f64> = p
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let alloc: Vec<usize> = p.iter().map(|w| (w * n as f64).round() as usize).collect();
    const CHUNK: usize = 1000;
    let chunks = trials.div_ceil(CHUNK);
    let means: Vec<Vec<f64>> = exec.map_range(chunks, |c| {
        let mut rng = seeded(derive(seed, &[c as u64]));
        let count = CHUNK.min(trials - c * CHUNK);
        (0..count)
            .map(|_| match strategy {
                SamplingStrategy::Random => {
                    let mut s = 0.0;
                    for _ in 0..n {
                        let u: f64 = rng.random();
                        let k = cdf.iter().position(|&q| u < q).unwrap_or(p.len() - 1);
                        s += normals[k].sample(&mut rng);
                    }
                    s / n as f64
                }
                SamplingStrategy::Stratified => {
                    let mut est = 0.0;
                    for (k, &nk) in alloc.iter().enumerate() {
                        if nk == 0 {
                            continue;
                        }
                        let s: f64 = (0..nk).map(|_| normals[k].sample(&mut rng)).sum();
                        est += p[k] * s / nk as f64;
                    }
                    est
                }
            })
            .collect()
    });
    let all: Vec<f64> = means.into_iter().flatten().collect();
    let m = all.iter().sum::<f64>() / all.len() as f64;
    Ok(all.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (all.len() - 1) as f64)
}
