//! Single-query plan search: cost-aware multi-objective Bayesian
//! optimization over configurations and placements at full resources,
//! warm-started from similar finished queries, followed by resource trimming.

mod gp;
mod pareto;
mod surrogate;

pub use gp::{Gp, GpPool, Observation, DEFAULT_NOISE};
pub use pareto::{pareto_optimize, TrimmedPlan};
pub use surrogate::{
    prediction_gap, prob_at_least, utility, utility_from_parts, CostModel, HistoryEntry, HistoryStore, Prediction,
    SpacePredictor, SurrogatePair, COST_FLOOR, GAP_EPSILON, GAP_WINDOW,
};

use std::collections::HashMap;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::JsonlWriter;
use crate::landscape::pareto_filter;
use crate::model::{Budget, PlanPoint, PlanSpace, Query, Verdict};
use crate::par::Execution;
use crate::profiler::{profile_plan, stratify, PrefixCache, SessionLimits, Stratification};
use crate::rng::{derive, seeded, Rng};
use crate::workload::Workload;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub seed: u64,
    pub limits: SessionLimits,
    /// Planner-side strata; 1 disables guided sampling.
    pub strata: usize,
    pub use_cache: bool,
    pub warm_start: bool,
    /// Simulated optimizer seconds charged per proposal.
    pub step_overhead: f64,
    /// Reference-tier GPUs profiling in parallel; wall time is GPU-seconds / this.
    pub profiling_parallelism: f64,
    /// Spaces up to this size are scored exhaustively each step.
    pub enumerate_limit: u64,
    /// Pool size sampled per step above `enumerate_limit`.
    pub pool_sample: usize,
    /// Noise multiplier applied to a prior's observations on replanning.
    pub stale_noise_factor: f64,
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            limits: SessionLimits::default(),
            strata: 4,
            use_cache: true,
            warm_start: true,
            step_overhead: 0.04,
            profiling_parallelism: 32.0,
            enumerate_limit: 20_000,
            pool_sample: 2_000,
            stale_noise_factor: 100.0,
            max_steps: None,
            execution: Execution::default(),
        }
    }
}

/// One SLO-compliant, resource-trimmed plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub plan: PlanPoint,
    pub accuracy_estimate: f64,
    pub latency: f64,
    /// Dollars per hour.
    pub cost: f64,
}

/// Compliant plans, kept free of (cost, latency) domination.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn extend(&mut self, more: impl IntoIterator<Item = Candidate>) {
        self.candidates.extend(more);
        self.candidates = pareto_filter(&self.candidates, |c| (c.cost, c.latency));
    }

    pub fn cheapest(&self) -> Option<&Candidate> {
        self.candidates
            .iter()
            .min_by(|a, b| a.cost.total_cmp(&b.cost).then(a.latency.total_cmp(&b.latency)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalMode {
    /// No fitted model and no usable history: a seeded random pick.
    Cold,
    Own,
    History,
}

/// One search step's telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub plan: PlanPoint,
    pub mode: ProposalMode,
    pub utility: f64,
    pub verdict: Verdict,
    pub samples: usize,
    pub accuracy_estimate: f64,
    pub latency: f64,
    pub accepted: bool,
    pub gpu_seconds: f64,
    /// Simulated planner seconds after this step.
    pub elapsed: f64,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub candidates: CandidateSet,
    pub steps: Vec<StepRecord>,
    /// Simulated planner seconds.
    pub elapsed: f64,
    pub gpu_seconds: f64,
    pub dollars: f64,
    /// 1-based proposal count of the first accepted plan.
    pub first_feasible_step: Option<usize>,
    /// Simulated planner seconds when the first plan was accepted.
    pub first_feasible_time: Option<f64>,
    pub surrogates: SurrogatePair,
}

impl SearchOutcome {
    pub fn write_telemetry(&self, path: impl AsRef<Path>, query: u64) -> Result<()> {
        #[derive(Serialize)]
        struct Header {
            kind: &'static str,
            query: u64,
        }
        let mut w = JsonlWriter::create(
            path,
            &Header {
                kind: "search_telemetry",
                query,
            },
        )?;
        for s in &self.steps {
            w.write(s)?;
        }
        w.finish()
    }
}

/// Index of the best score; ties go to lower predicted cost, then lower index.
fn best_of(scores: &[(f64, f64)]) -> Option<usize> {
    (0..scores.len()).reduce(|best, i| {
        let (ub, cb) = scores[best];
        let (ui, ci) = scores[i];
        if ui > ub || (ui == ub && ci < cb) {
            i
        } else {
            best
        }
    })
}

fn own_scores(
    pool: &[PlanPoint],
    a_slo: f64,
    l_slo: f64,
    surrogates: &SurrogatePair,
    cost: &CostModel,
    exec: Execution,
) -> Vec<(f64, f64)> {
    surrogates
        .predict_many(pool, exec)
        .iter()
        .map(|p| (utility(p, a_slo, l_slo, cost), cost.dollars(p.latency())))
        .collect()
}

/// Weighted vote of the top history entries over `pool`.
pub fn history_propose(
    pool: &[PlanPoint],
    a_slo: f64,
    l_slo: f64,
    history: &HistoryStore,
    cost: &CostModel,
) -> Option<(usize, f64)> {
    let weights = history.vote_weights();
    if pool.is_empty() || weights.is_empty() {
        return None;
    }
    let scores: Vec<(f64, f64)> = pool
        .iter()
        .map(|p| {
            let u = weights
                .iter()
                .map(|&(h, w)| w * utility(&history.entry(h).surrogates.predict(p), a_slo, l_slo, cost))
                .sum();
            (u, 0.0)
        })
        .collect();
    best_of(&scores).map(|i| (i, scores[i].0))
}

/// Picks the next plan from `pool`: the query's own argmax utility once its
/// prediction gap beats the best history gap, the history vote otherwise.
/// Returns the pool index, the branch taken and the winning score.
pub fn propose(
    pool: &[PlanPoint],
    a_slo: f64,
    l_slo: f64,
    surrogates: &SurrogatePair,
    history: &HistoryStore,
    cost: &CostModel,
) -> Option<(usize, ProposalMode, f64)> {
    if pool.is_empty() {
        return None;
    }
    match history.best_gap() {
        Some(h) if !(surrogates.own_gap() < h) => {
            history_propose(pool, a_slo, l_slo, history, cost).map(|(i, u)| (i, ProposalMode::History, u))
        }
        _ => {
            let scores = own_scores(pool, a_slo, l_slo, surrogates, cost, Execution::Sequential);
            best_of(&scores).map(|i| (i, ProposalMode::Own, scores[i].0))
        }
    }
}

/// Searches plans for `query` until its budget or the space runs out.
///
/// `history` is read-only here; its gap statistics are tracked on a private
/// copy. `prior` seeds the query's own surrogates (for replanning); its
/// observations are made `stale_noise_factor` times noisier first.
pub fn single_query_search(
    query: &Query,
    workload: &Workload,
    history: &HistoryStore,
    config: &SearchConfig,
    prior: Option<SurrogatePair>,
) -> Result<SearchOutcome> {
    let space = PlanSpace::search(&workload.pipeline, &workload.topology);
    let mut history = history.clone();
    history.reset_gaps();
    let use_history = config.warm_start && !history.is_empty();
    let mut surrogates = match prior {
        Some(mut p) => {
            p.inflate_noise(config.stale_noise_factor);
            p
        }
        None => SurrogatePair::new(),
    };
    let cost = CostModel {
        expected_cases: config.limits.min_samples as f64,
        price_per_gpu_hour: workload.reference_price(),
    };
    let strat = if config.strata > 1 {
        stratify(&workload.landscape.cases().features, config.strata, derive(config.seed, &[query.id, 0x57a7]))?
    } else {
        Stratification::single(workload.landscape.cases().len())?
    };
    let case_seed = derive(config.seed, &[query.id, 0xca5e]);
    let mut rng = seeded(derive(config.seed, &[query.id, 0x9001]));
    let mut cache = PrefixCache::new();
    let mut profiled = vec![false; space.len() as usize];
    let mut remaining = space.len();
    let mut out = SearchOutcome {
        candidates: CandidateSet::default(),
        steps: Vec::new(),
        elapsed: 0.0,
        gpu_seconds: 0.0,
        dollars: 0.0,
        first_feasible_step: None,
        first_feasible_time: None,
        surrogates: SurrogatePair::new(),
    };
    let mut own_predictor = (space.len() <= config.enumerate_limit).then(|| {
        let plans: Vec<PlanPoint> = space.iter().collect();
        SpacePredictor::new(&plans)
    });
    let mut history_utils: HashMap<usize, Vec<f64>> = HashMap::new();
    let within_budget = |elapsed: f64, gpu: f64| match query.budget {
        Budget::ResponseSeconds(s) => elapsed < s,
        Budget::ProfilingGpuHours(h) => gpu < h * 3600.0,
    };
    while remaining > 0 && within_budget(out.elapsed, out.gpu_seconds) {
        if config.max_steps.is_some_and(|m| out.steps.len() >= m) {
            break;
        }
        let pool_idx = pool_indices(&space, &profiled, remaining, config, &mut rng);
        let (pick, mode, score) = if use_history && !(surrogates.own_gap() < history.best_gap().unwrap_or(0.0)) {
            let weights = history.vote_weights();
            for &(h, _) in &weights {
                history_utils.entry(h).or_insert_with(|| {
                    let preds = history.entry(h).space_predictions(&space, config.execution);
                    config
                        .execution
                        .map_slice(&preds, |p| utility(p, query.a_slo, query.l_slo, &cost))
                });
            }
            let scores: Vec<(f64, f64)> = pool_idx
                .iter()
                .map(|&i| (weights.iter().map(|&(h, w)| w * history_utils[&h][i as usize]).sum(), 0.0))
                .collect();
            let i = best_of(&scores).expect("non-empty pool");
            (i, ProposalMode::History, scores[i].0)
        } else if surrogates.is_fitted() {
            let preds = match own_predictor.as_mut() {
                Some(sp) => {
                    let all = sp.predict(&surrogates, config.execution);
                    pool_idx.iter().map(|&i| all[i as usize]).collect()
                }
                None => {
                    let pool: Vec<PlanPoint> = pool_idx.iter().map(|&i| space.plan(i)).collect();
                    surrogates.predict_many(&pool, config.execution)
                }
            };
            let scores: Vec<(f64, f64)> = preds
                .iter()
                .map(|p| (utility(p, query.a_slo, query.l_slo, &cost), cost.dollars(p.latency())))
                .collect();
            let i = best_of(&scores).expect("non-empty pool");
            (i, ProposalMode::Own, scores[i].0)
        } else {
            (rng.random_range(0..pool_idx.len()), ProposalMode::Cold, 0.0)
        };
        let plan = space.plan(pool_idx[pick]);
        profiled[pool_idx[pick] as usize] = true;
        remaining -= 1;

        let mut case_rng: Rng = seeded(case_seed);
        let outcome = profile_plan(
            &plan,
            workload,
            &strat,
            config.use_cache.then_some(&mut cache),
            query.a_slo,
            &config.limits,
            &mut case_rng,
        )?;
        let latency = outcome.latency_estimate;
        out.gpu_seconds += outcome.profiling_cost;
        out.elapsed += outcome.profiling_cost / config.profiling_parallelism + config.step_overhead;
        let accepted = outcome.verdict == Verdict::PassAccuracy && latency <= query.l_slo;
        if accepted {
            let trimmed = pareto_optimize(&plan, query.l_slo, workload)?;
            out.candidates.extend(trimmed.into_iter().map(|t| Candidate {
                plan: t.plan,
                accuracy_estimate: outcome.accuracy_estimate,
                latency: t.latency,
                cost: t.cost,
            }));
            if out.first_feasible_step.is_none() {
                out.first_feasible_step = Some(out.steps.len() + 1);
                out.first_feasible_time = Some(out.elapsed);
            }
        }
        history.record(&plan, outcome.accuracy_estimate, latency);
        surrogates.observe(&plan, outcome.accuracy_estimate, latency);
        out.steps.push(StepRecord {
            step: out.steps.len() + 1,
            plan,
            mode,
            utility: score,
            verdict: outcome.verdict,
            samples: outcome.samples_used,
            accuracy_estimate: outcome.accuracy_estimate,
            latency,
            accepted,
            gpu_seconds: outcome.profiling_cost,
            elapsed: out.elapsed,
        });
    }
    out.dollars = out.gpu_seconds / 3600.0 * workload.reference_price();
    out.surrogates = surrogates;
    Ok(out)
}

fn pool_indices(space: &PlanSpace, profiled: &[bool], remaining: u64, config: &SearchConfig, rng: &mut Rng) -> Vec<u64> {
    if space.len() <= config.enumerate_limit || remaining <= config.pool_sample as u64 {
        return (0..space.len()).filter(|&i| !profiled[i as usize]).collect();
    }
    let mut picked = std::collections::BTreeSet::new();
    while picked.len() < config.pool_sample {
        let i = rng.random_range(0..space.len());
        if !profiled[i as usize] {
            picked.insert(i);
        }
    }
    picked.into_iter().collect()
}
