//! Seeded synthetic ground truth standing in for real pipelines and datasets.
//!
//! A landscape fixes, for every configuration, the per-stratum accuracy
//! distribution of individual cases, the per-operator reference compute time
//! and the bytes each operator emits. Accuracy never depends on placement or
//! resources, and output sizes only on the configuration of the operator and
//! the operators before it. Everything is a pure function of stored tables,
//! so planners can be checked against exhaustive sweeps.

mod oracle;
mod trace;

pub use oracle::{pareto_filter, true_pareto_set, true_pareto_set_with, TruePlanMetrics, EXHAUSTIVE_LIMIT};
pub use trace::{generate_trace, ArrivalTrace, TraceEntry, TraceParams};

use rand::Rng as _;
use rand::seq::SliceRandom;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{PlanError, Result};
use crate::latency::OperatorProfile;
use crate::model::{PipelineSpec, PlanPoint};
use crate::rng::{derive, seeded, Rng};

const ACC_FLOOR: f64 = 0.05;
const ACC_CEILING: f64 = 0.98;

/// Generator knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Difficulty {
    /// 1.0 makes accuracy strictly increase with every knob's cost;
    /// 0.0 makes per-option effects unrelated to cost.
    pub monotone_tendency: f64,
    /// Scale of the interaction terms between neighbouring operators.
    pub ruggedness: f64,
    /// Typical per-case accuracy standard deviation inside a stratum.
    pub case_noise: f64,
    /// Standard deviation of per-case features around their stratum centre.
    pub feature_noise: f64,
    /// Hidden stratum count.
    pub strata: usize,
    /// Logit spread between the easiest and hardest stratum.
    pub stratum_spread: f64,
    /// Stratum weights; empty means equal weights.
    #[serde(default)]
    pub stratum_weights: Vec<f64>,
    pub cases: usize,
}

impl Difficulty {
    /// Costlier options are always more accurate.
    pub fn monotone() -> Self {
        Self {
            monotone_tendency: 1.0,
            ruggedness: 0.0,
            ..Self::rugged()
        }
    }

    /// Accuracy only loosely follows cost, with interacting operators.
    pub fn rugged() -> Self {
        Self {
            monotone_tendency: 0.3,
            ruggedness: 0.6,
            case_noise: 0.15,
            feature_noise: 0.6,
            strata: 4,
            stratum_spread: 1.2,
            stratum_weights: Vec::new(),
            cases: 4000,
        }
    }
}

impl Default for Difficulty {
    fn default() -> Self {
        Self::rugged()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub weight: f64,
    /// Logit offset shared by every configuration.
    pub offset: f64,
    /// Per-case accuracy standard deviation before the Bernoulli-variance cap.
    pub sigma: f64,
}

/// Profiling cases: one low-dimensional feature point and hidden stratum each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSet {
    pub features: Vec<[f64; 2]>,
    pub stratum: Vec<usize>,
}

impl CaseSet {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthLandscape {
    pub seed: u64,
    pub pipeline: String,
    knob_sizes: Vec<usize>,
    strata: Vec<Stratum>,
    baseline: f64,
    /// `[op][option]` logit contribution shared by all strata.
    main_effects: Vec<Vec<f64>>,
    /// `[stratum][op][option]` stratum-specific logit contribution.
    stratum_effects: Vec<Vec<Vec<f64>>>,
    /// `[op][option_op * K_next + option_next]` for neighbouring operators.
    interactions: Vec<Vec<f64>>,
    /// `[op][option]` seconds per item at full resources on the reference tier.
    base_compute: Vec<Vec<f64>>,
    /// `[op][option]` multiplier on the operator's own and downstream output sizes.
    size_factor: Vec<Vec<f64>>,
    base_output: Vec<f64>,
    /// Each operator's ancestors plus itself: the knobs its output size depends on.
    upstream: Vec<Vec<usize>>,
    #[serde(default)]
    accuracy_shift: f64,
    cases: CaseSet,
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn normal(rng: &mut Rng, sd: f64) -> f64 {
    if sd == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sd).expect("finite sd").sample(rng)
}

/// Builds a landscape for `pipeline`; identical inputs give identical output.
pub fn generate_landscape(seed: u64, pipeline: &PipelineSpec, difficulty: &Difficulty) -> GroundTruthLandscape {
    let mut rng = seeded(derive(seed, &[0x1a4d]));
    let knob_sizes = pipeline.knob_sizes();
    let m = knob_sizes.len();
    let k_true = difficulty.strata.max(1);
    let t = difficulty.monotone_tendency.clamp(0.0, 1.0);

    let weights = if difficulty.stratum_weights.len() == k_true {
        let s: f64 = difficulty.stratum_weights.iter().sum();
        difficulty.stratum_weights.iter().map(|w| w / s).collect()
    } else {
        vec![1.0 / k_true as f64; k_true]
    };
    let strata: Vec<Stratum> = weights
        .iter()
        .enumerate()
        .map(|(k, &weight)| {
            let centred = if k_true == 1 {
                0.0
            } else {
                k as f64 / (k_true - 1) as f64 - 0.5
            };
            Stratum {
                weight,
                offset: difficulty.stratum_spread * centred,
                sigma: difficulty.case_noise * rng.random_range(0.6..1.4),
            }
        })
        .collect();

    let main_effects: Vec<Vec<f64>> = knob_sizes
        .iter()
        .map(|&k| {
            let trend = rng.random_range(0.8..1.6);
            (0..k)
                .map(|o| {
                    let rank = if k > 1 { o as f64 / (k - 1) as f64 } else { 0.0 };
                    t * trend * rank + (1.0 - t) * normal(&mut rng, 0.8)
                })
                .collect()
        })
        .collect();
    let stratum_scale = 0.4 * (1.0 - t);
    let stratum_effects = (0..k_true)
        .map(|_| {
            knob_sizes
                .iter()
                .map(|&k| (0..k).map(|_| normal(&mut rng, stratum_scale)).collect())
                .collect()
        })
        .collect();
    let interactions = (0..m.saturating_sub(1))
        .map(|i| {
            (0..knob_sizes[i] * knob_sizes[i + 1])
                .map(|_| normal(&mut rng, difficulty.ruggedness))
                .collect()
        })
        .collect();
    let centre: f64 = main_effects
        .iter()
        .map(|row| row.iter().sum::<f64>() / row.len() as f64)
        .sum();
    let baseline = 0.8 - centre;

    let base_compute = knob_sizes
        .iter()
        .map(|&k| {
            let scale = rng.random_range(0.004..0.030);
            (0..k)
                .map(|o| scale * (1.0 + 0.6 * o as f64) * rng.random_range(0.95..1.05))
                .collect()
        })
        .collect();
    let size_factor = knob_sizes
        .iter()
        .map(|&k| {
            (0..k)
                .map(|o| {
                    let rank = if k > 1 { o as f64 / (k - 1) as f64 } else { 0.5 };
                    (0.6 + 0.8 * rank) * rng.random_range(0.97..1.03)
                })
                .collect()
        })
        .collect();
    let base_output = pipeline.operators().iter().map(|o| o.base_output_size).collect();
    let cases = generate_cases(&mut rng, &weights, difficulty);
    let upstream = (0..m)
        .map(|i| {
            let mut a = pipeline.ancestors(i);
            a.push(i);
            a
        })
        .collect();

    GroundTruthLandscape {
        seed,
        pipeline: pipeline.name().to_string(),
        knob_sizes,
        strata,
        baseline,
        main_effects,
        stratum_effects,
        interactions,
        base_compute,
        size_factor,
        base_output,
        upstream,
        accuracy_shift: 0.0,
        cases,
    }
}

fn generate_cases(rng: &mut Rng, weights: &[f64], difficulty: &Difficulty) -> CaseSet {
    let k = weights.len();
    let n = difficulty.cases.max(k);
    let mut counts: Vec<usize> = weights.iter().map(|w| (w * n as f64).round() as usize).collect();
    let assigned: usize = counts.iter().sum();
    if assigned != n {
        let last = counts.len() - 1;
        counts[last] = (counts[last] + n).saturating_sub(assigned);
    }
    let mut labels: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(s, &c)| std::iter::repeat_n(s, c))
        .collect();
    labels.shuffle(rng);
    let centres: Vec<[f64; 2]> = (0..k)
        .map(|s| {
            let angle = std::f64::consts::TAU * s as f64 / k as f64;
            [3.0 * angle.cos(), 3.0 * angle.sin()]
        })
        .collect();
    let features = labels
        .iter()
        .map(|&s| {
            [
                centres[s][0] + normal(rng, difficulty.feature_noise),
                centres[s][1] + normal(rng, difficulty.feature_noise),
            ]
        })
        .collect();
    CaseSet {
        features,
        stratum: labels,
    }
}

impl GroundTruthLandscape {
    pub fn knob_sizes(&self) -> &[usize] {
        &self.knob_sizes
    }

    pub fn operators(&self) -> usize {
        self.knob_sizes.len()
    }

    pub fn strata(&self) -> &[Stratum] {
        &self.strata
    }

    pub fn strata_count(&self) -> usize {
        self.strata.len()
    }

    pub fn cases(&self) -> &CaseSet {
        &self.cases
    }

    pub fn accuracy_shift(&self) -> f64 {
        self.accuracy_shift
    }

    fn logit(&self, k: usize, config: &[usize]) -> f64 {
        let mut z = self.baseline + self.strata[k].offset - self.accuracy_shift;
        for (i, &c) in config.iter().enumerate() {
            z += self.main_effects[i][c] + self.stratum_effects[k][i][c];
        }
        for (i, table) in self.interactions.iter().enumerate() {
            z += table[config[i] * self.knob_sizes[i + 1] + config[i + 1]];
        }
        z
    }

    /// Mean case accuracy of stratum `k` under `config`.
    pub fn stratum_mean(&self, k: usize, config: &[usize]) -> f64 {
        ACC_FLOOR + (ACC_CEILING - ACC_FLOOR) * logistic(self.logit(k, config))
    }

    /// Per-case standard deviation inside stratum `k`, capped below the
    /// largest spread a [0, 1] variable with that mean can have.
    pub fn stratum_std(&self, k: usize, config: &[usize]) -> f64 {
        let mu = self.stratum_mean(k, config);
        self.strata[k].sigma.min(0.9 * (mu * (1.0 - mu)).sqrt())
    }

    /// Population accuracy `Σ p_k μ_k(config)`.
    pub fn true_accuracy(&self, config: &[usize]) -> f64 {
        self.strata
            .iter()
            .enumerate()
            .map(|(k, s)| s.weight * self.stratum_mean(k, config))
            .sum()
    }

    /// One case-accuracy draw from stratum `stratum` for the plan's configuration.
    pub fn sample_case(&self, plan: &PlanPoint, stratum: usize, rng: &mut Rng) -> Result<f64> {
        self.sample_config_case(&plan.configuration, stratum, rng)
    }

    pub fn sample_config_case(&self, config: &[usize], stratum: usize, rng: &mut Rng) -> Result<f64> {
        if stratum >= self.strata.len() {
            return Err(PlanError::UnknownStratum {
                stratum,
                count: self.strata.len(),
            });
        }
        let mu = self.stratum_mean(stratum, config);
        let sd = self.stratum_std(stratum, config);
        if sd == 0.0 {
            return Ok(mu);
        }
        // Beta with matching mean and variance keeps draws inside [0, 1]
        // without the bias clipping a normal draw would add.
        let common = mu * (1.0 - mu) / (sd * sd) - 1.0;
        let beta = Beta::new(mu * common, (1.0 - mu) * common).expect("valid beta parameters");
        Ok(beta.sample(rng).clamp(0.0, 1.0))
    }

    /// Accuracy of one concrete case: a fixed function of (case, configuration).
    pub fn case_accuracy(&self, config: &[usize], case: usize) -> f64 {
        let cfg_key = config.iter().fold(0u64, |acc, &c| acc.wrapping_mul(131).wrapping_add(c as u64 + 1));
        let mut rng = seeded(derive(self.seed, &[0xca5e, case as u64, cfg_key]));
        self.sample_config_case(config, self.cases.stratum[case], &mut rng)
            .expect("case strata are in range")
    }

    /// A landscape from the same family: effects jittered by `jitter` (logit
    /// sd), fresh cases, identical compute and output-size tables.
    pub fn sibling(&self, member: u64, jitter: f64, difficulty: &Difficulty) -> Self {
        let seed = derive(self.seed, &[0x5151, member]);
        let mut rng = seeded(seed);
        let mut out = self.clone();
        out.seed = seed;
        for s in &mut out.strata {
            s.offset += normal(&mut rng, jitter * 0.5);
        }
        for row in &mut out.main_effects {
            for v in row {
                *v += normal(&mut rng, jitter);
            }
        }
        for per_stratum in &mut out.stratum_effects {
            for row in per_stratum {
                for v in row {
                    *v += normal(&mut rng, jitter * 0.5);
                }
            }
        }
        for table in &mut out.interactions {
            for v in table {
                *v += normal(&mut rng, jitter);
            }
        }
        let weights: Vec<f64> = out.strata.iter().map(|s| s.weight).collect();
        out.cases = generate_cases(&mut rng, &weights, difficulty);
        out
    }

    /// Copy whose accuracy drops by `logit_shift` in every stratum.
    pub fn with_accuracy_shift(&self, logit_shift: f64) -> Self {
        let mut out = self.clone();
        out.accuracy_shift += logit_shift;
        out
    }

    /// Reference-tier compute seconds of every operator under `config`.
    pub fn per_op_compute(&self, config: &[usize]) -> Vec<f64> {
        (0..self.operators()).map(|i| self.base_compute(i, config)).collect()
    }
}

impl OperatorProfile for GroundTruthLandscape {
    fn base_compute(&self, op: usize, configuration: &[usize]) -> f64 {
        self.base_compute[op][configuration[op]]
    }

    fn output_size(&self, op: usize, configuration: &[usize]) -> f64 {
        let factor: f64 = self.upstream[op]
            .iter()
            .map(|&j| self.size_factor[j][configuration[j]])
            .product();
        self.base_output[op] * factor
    }
}
