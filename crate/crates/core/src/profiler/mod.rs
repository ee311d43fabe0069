//! Accuracy profiling with stratified case selection, sequential t-tests
//! and a per-query prefix cache.

mod cache;
mod stratify;
mod variance;

pub use cache::PrefixCache;
pub use stratify::{stratify, Stratification};
pub use variance::{simulate_mean_variance, variance_random, variance_stratified, SamplingStrategy};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::Result;
use crate::latency::OperatorProfile;
use crate::model::{PlanPoint, ProfileOutcome, Verdict};
use crate::rng::Rng;
use crate::workload::Workload;

/// Per-pipeline fixed sample counts used by the no-early-stop baseline.
pub const FIXED_N_BASELINES: [(&str, usize); 5] =
    [("SR", 356), ("VT", 353), ("LVC", 688), ("DVC", 365), ("ACG", 252)];

pub fn fixed_n_baseline(pipeline: &str) -> Option<usize> {
    FIXED_N_BASELINES
        .iter()
        .find(|(name, _)| name.eq_ignore_ascii_case(pipeline))
        .map(|&(_, n)| n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLimits {
    pub confidence: f64,
    pub min_samples: usize,
    pub n_max: usize,
    /// Ratio between consecutive test points, starting at `min_samples`.
    #[serde(default = "default_look_growth")]
    pub look_growth: f64,
    /// When set, draw exactly this many cases and decide on the sign of
    /// `mean - A_slo` without early stopping.
    #[serde(default)]
    pub fixed_n: Option<usize>,
}

impl Default for SessionLimits {
    fn default() -> Self {
        Self {
            confidence: 0.99,
            min_samples: 50,
            n_max: 1000,
            look_growth: default_look_growth(),
            fixed_n: None,
        }
    }
}

fn default_look_growth() -> f64 {
    1.5
}

impl SessionLimits {
    /// Sample counts at which the t-test runs: `min_samples`, then growing
    /// by `look_growth` (at least one sample), ending at `n_max`.
    pub fn looks(&self) -> Vec<usize> {
        let max = self.n_max.max(1);
        let mut n = self.min_samples.clamp(1, max);
        let mut out = vec![n];
        while n < max {
            n = ((n as f64 * self.look_growth).ceil() as usize).clamp(n + 1, max);
            out.push(n);
        }
        out
    }

    /// Per-look significance level: `1 - confidence` split evenly over the
    /// looks, so the chance of any wrong verdict stays within it.
    pub fn per_look_alpha(&self) -> f64 {
        (1.0 - self.confidence) / self.looks().len() as f64
    }
}

/// Welford running mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    pub n: usize,
    pub mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Unbiased sample variance; zero below two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

/// Two-sided one-sample t-test of `mean == target`. Returns the p-value.
pub fn t_test_p_value(stats: &RunningStats, target: f64) -> f64 {
    if stats.n < 2 {
        return 1.0;
    }
    let diff = stats.mean - target;
    let se = (stats.variance() / stats.n as f64).sqrt();
    if se == 0.0 {
        return if diff == 0.0 { 1.0 } else { 0.0 };
    }
    let t = (diff / se).abs();
    let dist = StudentsT::new(0.0, 1.0, (stats.n - 1) as f64).expect("n >= 2");
    (2.0 * dist.sf(t)).clamp(0.0, 1.0)
}

/// One profiling session's audit line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileLogRecord {
    pub query: u64,
    pub plan: PlanPoint,
    pub n: usize,
    pub verdict: Verdict,
    pub accuracy_estimate: f64,
    pub gpu_seconds: f64,
}

/// Profiles `plan` against `a_slo`.
///
/// Cases come from a fresh copy of `strat` driven by `rng`; each case's
/// compute is charged on the reference tier except for operators whose
/// output for that case is already in `cache`.
pub fn profile_plan(
    plan: &PlanPoint,
    workload: &Workload,
    strat: &Stratification,
    mut cache: Option<&mut PrefixCache>,
    a_slo: f64,
    limits: &SessionLimits,
    rng: &mut Rng,
) -> Result<ProfileOutcome> {
    let config = &plan.configuration;
    let per_op = workload.profiling_seconds(config);
    let sizes: Vec<f64> = (0..per_op.len())
        .map(|i| workload.landscape.output_size(i, config))
        .collect();
    let alpha = limits.per_look_alpha();
    let looks = limits.looks();
    let mut next_look = 0;
    let cap = limits.fixed_n.unwrap_or(limits.n_max).max(1);
    let mut strat = strat.restarted();
    let mut stats = RunningStats::default();
    let mut gpu_seconds = 0.0;
    let mut verdict = Verdict::Inconclusive;
    while stats.n < cap {
        let case = strat.next_case(rng)?;
        stats.push(workload.landscape.case_accuracy(config, case));
        let cached = match cache.as_deref_mut() {
            Some(c) => {
                let hit = c.lookup_case(config, case);
                for k in hit + 1..=config.len() {
                    c.insert(&config[..k], [case], sizes[k - 1]);
                }
                hit
            }
            None => 0,
        };
        gpu_seconds += per_op[cached..].iter().sum::<f64>();
        let look = looks.get(next_look) == Some(&stats.n);
        next_look += look as usize;
        if limits.fixed_n.is_none() && look && t_test_p_value(&stats, a_slo) < alpha {
            verdict = if stats.mean > a_slo {
                Verdict::PassAccuracy
            } else {
                Verdict::FailAccuracy
            };
            break;
        }
    }
    if limits.fixed_n.is_some() {
        verdict = if stats.mean >= a_slo {
            Verdict::PassAccuracy
        } else {
            Verdict::FailAccuracy
        };
    }
    Ok(ProfileOutcome {
        accuracy_estimate: stats.mean,
        samples_used: stats.n,
        verdict,
        latency_estimate: workload.latency(plan)?,
        profiling_cost: gpu_seconds,
    })
}
