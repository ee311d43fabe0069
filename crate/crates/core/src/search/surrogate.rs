//! Accuracy and latency surrogates, the acquisition utility and the store
//! of finished queries' surrogates used for warm starts.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::gp::{Gp, GpPool, DEFAULT_NOISE};
use crate::model::{PlanPoint, PlanSpace};
use crate::par::Execution;

/// Trailing observations averaged into a surrogate's own prediction gap.
pub const GAP_WINDOW: usize = 5;
pub const COST_FLOOR: f64 = 1e-6;
pub const GAP_EPSILON: f64 = 1e-6;

const ACCURACY_SCALE_FLOOR: f64 = 0.05;
const LOG_LATENCY_SCALE_FLOOR: f64 = 0.25;

/// What the surrogates believe about one plan. Latency is modelled on a
/// log scale: `log_latency` is the predictive mean of `ln(seconds)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub accuracy: f64,
    pub accuracy_std: f64,
    pub log_latency: f64,
    pub log_latency_std: f64,
}

impl Prediction {
    pub fn latency(&self) -> f64 {
        self.log_latency.exp()
    }
}

/// `Pr[X >= threshold]` for `X ~ N(mu, sigma²)`; a step function when `sigma == 0`.
pub fn prob_at_least(mu: f64, sigma: f64, threshold: f64) -> f64 {
    if sigma <= 0.0 {
        return match mu.partial_cmp(&threshold) {
            Some(std::cmp::Ordering::Greater) => 1.0,
            Some(std::cmp::Ordering::Equal) => 0.5,
            _ => 0.0,
        };
    }
    Normal::standard().cdf((mu - threshold) / sigma)
}

/// `Pr[acc >= A] * Pr[lat <= L] / max(cost, floor)`.
pub fn utility_from_parts(p_accuracy: f64, p_latency: f64, cost: f64) -> f64 {
    p_accuracy * p_latency / cost.max(COST_FLOOR)
}

/// Maps predicted latency to an expected profiling bill in dollars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// Cases a profiling session is expected to draw.
    pub expected_cases: f64,
    pub price_per_gpu_hour: f64,
}

impl CostModel {
    pub fn dollars(&self, latency_seconds: f64) -> f64 {
        self.expected_cases * latency_seconds / 3600.0 * self.price_per_gpu_hour
    }
}

/// Acquisition utility of a prediction.
pub fn utility(pred: &Prediction, a_slo: f64, l_slo: f64, cost: &CostModel) -> f64 {
    let pa = prob_at_least(pred.accuracy, pred.accuracy_std, a_slo);
    let pl = prob_at_least(l_slo.ln(), pred.log_latency_std, pred.log_latency);
    utility_from_parts(pa, pl, cost.dollars(pred.latency()))
}

/// `|Δaccuracy| + |Δlatency| / observed latency`.
pub fn prediction_gap(pred: &Prediction, accuracy: f64, latency: f64) -> f64 {
    (pred.accuracy - accuracy).abs() + (pred.latency() - latency).abs() / latency.max(1e-12)
}

/// Accuracy surrogate over configurations and latency surrogate over
/// (configuration, placement), plus the pair's recent self-prediction gaps.
#[derive(Debug, Clone)]
pub struct SurrogatePair {
    accuracy: Gp,
    latency: Gp,
    recent_gaps: VecDeque<f64>,
}

impl Default for SurrogatePair {
    fn default() -> Self {
        Self::new()
    }
}

fn latency_input(plan: &PlanPoint) -> Vec<usize> {
    plan.configuration.iter().chain(&plan.placement).copied().collect()
}

impl SurrogatePair {
    pub fn new() -> Self {
        Self {
            accuracy: Gp::new(ACCURACY_SCALE_FLOOR),
            latency: Gp::new(LOG_LATENCY_SCALE_FLOOR),
            recent_gaps: VecDeque::with_capacity(GAP_WINDOW),
        }
    }

    pub fn observation_count(&self) -> usize {
        self.latency.len()
    }

    pub fn is_fitted(&self) -> bool {
        !self.latency.is_empty()
    }

    pub fn predict(&self, plan: &PlanPoint) -> Prediction {
        let (accuracy, accuracy_std) = self.accuracy.predict(&plan.configuration);
        let (log_latency, log_latency_std) = self.latency.predict(&latency_input(plan));
        Prediction {
            accuracy,
            accuracy_std,
            log_latency,
            log_latency_std,
        }
    }

    /// Predictions for many plans, in input order.
    pub fn predict_many(&self, plans: &[PlanPoint], exec: Execution) -> Vec<Prediction> {
        let configs: Vec<Vec<usize>> = plans.iter().map(|p| p.configuration.clone()).collect();
        let inputs: Vec<Vec<usize>> = plans.iter().map(latency_input).collect();
        let acc = self.accuracy.predict_many(&configs, exec);
        let lat = self.latency.predict_many(&inputs, exec);
        acc.into_iter().zip(lat).map(|(a, l)| combine(a, l)).collect()
    }

    /// Mean gap over the trailing window; infinite before any observation.
    pub fn own_gap(&self) -> f64 {
        if self.recent_gaps.is_empty() {
            f64::INFINITY
        } else {
            self.recent_gaps.iter().sum::<f64>() / self.recent_gaps.len() as f64
        }
    }

    /// Records how far the current prediction was from the observation, then refits.
    pub fn observe(&mut self, plan: &PlanPoint, accuracy: f64, latency: f64) {
        if self.is_fitted() {
            let gap = prediction_gap(&self.predict(plan), accuracy, latency);
            if self.recent_gaps.len() == GAP_WINDOW {
                self.recent_gaps.pop_front();
            }
            self.recent_gaps.push_back(gap);
        }
        self.accuracy.observe(plan.configuration.clone(), accuracy, DEFAULT_NOISE);
        self.latency.observe(latency_input(plan), latency.ln(), DEFAULT_NOISE);
    }

    /// Makes every stored observation `factor` times noisier.
    pub fn inflate_noise(&mut self, factor: f64) {
        self.accuracy.inflate_noise(factor);
        self.latency.inflate_noise(factor);
    }
}

fn combine((accuracy, accuracy_std): (f64, f64), (log_latency, log_latency_std): (f64, f64)) -> Prediction {
    Prediction {
        accuracy,
        accuracy_std,
        log_latency,
        log_latency_std,
    }
}

/// Predictions of one growing [`SurrogatePair`] over every plan of a space,
/// updated incrementally as the pair gains observations.
#[derive(Debug, Clone)]
pub struct SpacePredictor {
    config_of: Vec<usize>,
    accuracy: GpPool,
    latency: GpPool,
}

impl SpacePredictor {
    pub fn new(plans: &[PlanPoint]) -> Self {
        let mut configs: Vec<Vec<usize>> = Vec::new();
        let mut index = std::collections::HashMap::new();
        let config_of = plans
            .iter()
            .map(|p| {
                *index.entry(p.configuration.clone()).or_insert_with(|| {
                    configs.push(p.configuration.clone());
                    configs.len() - 1
                })
            })
            .collect();
        Self {
            config_of,
            accuracy: GpPool::new(configs),
            latency: GpPool::new(plans.iter().map(latency_input).collect()),
        }
    }

    pub fn predict(&mut self, surrogates: &SurrogatePair, exec: Execution) -> Vec<Prediction> {
        let acc = self.accuracy.predict(&surrogates.accuracy, exec);
        let lat = self.latency.predict(&surrogates.latency, exec);
        self.config_of.iter().zip(lat).map(|(&c, l)| combine(acc[c], l)).collect()
    }
}

type SpaceCache = Arc<Mutex<Option<(Vec<usize>, Arc<Vec<Prediction>>)>>>;

fn space_key(space: &PlanSpace) -> Vec<usize> {
    let mut k = space.knob_sizes().to_vec();
    k.extend([space.placement_count(), space.len() as usize]);
    k
}

/// A finished query's surrogates and its running gap to the current query.
#[derive(Debug, Clone)]
pub struct HistoryEntry {
    pub label: String,
    pub surrogates: SurrogatePair,
    gap_sum: f64,
    gap_count: usize,
    /// Shared by clones, since the surrogates never change once stored.
    space_predictions: SpaceCache,
}

impl HistoryEntry {
    /// Mean gap so far; zero before any comparison.
    pub fn gap(&self) -> f64 {
        if self.gap_count == 0 {
            0.0
        } else {
            self.gap_sum / self.gap_count as f64
        }
    }

    /// Predictions over every plan of `space`, computed once and cached.
    pub fn space_predictions(&self, space: &PlanSpace, exec: Execution) -> Arc<Vec<Prediction>> {
        let key = space_key(space);
        let mut slot = self.space_predictions.lock().expect("prediction cache poisoned");
        if let Some((k, p)) = slot.as_ref() {
            if *k == key {
                return p.clone();
            }
        }
        let plans: Vec<PlanPoint> = space.iter().collect();
        let preds = Arc::new(self.surrogates.predict_many(&plans, exec));
        *slot = Some((key, preds.clone()));
        preds
    }
}

/// Bounded ring of finished queries' surrogates.
#[derive(Debug, Clone)]
pub struct HistoryStore {
    entries: VecDeque<HistoryEntry>,
    capacity: usize,
    pub top_k: usize,
}

impl Default for HistoryStore {
    fn default() -> Self {
        Self::new(64, 10)
    }
}

impl HistoryStore {
    pub fn new(capacity: usize, top_k: usize) -> Self {
        Self {
            entries: VecDeque::new(),
            capacity: capacity.max(1),
            top_k,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &HistoryEntry> {
        self.entries.iter()
    }

    /// Adds a finished query, evicting the oldest at capacity.
    pub fn push(&mut self, label: impl Into<String>, surrogates: SurrogatePair) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(HistoryEntry {
            label: label.into(),
            surrogates,
            gap_sum: 0.0,
            gap_count: 0,
            space_predictions: SpaceCache::default(),
        });
    }

    /// Forgets all gap statistics, e.g. when a new query starts.
    pub fn reset_gaps(&mut self) {
        for e in &mut self.entries {
            e.gap_sum = 0.0;
            e.gap_count = 0;
        }
    }

    /// Charges every entry its gap to a new profiled observation.
    pub fn record(&mut self, plan: &PlanPoint, accuracy: f64, latency: f64) {
        for e in &mut self.entries {
            let g = prediction_gap(&e.surrogates.predict(plan), accuracy, latency);
            e.gap_sum += g;
            e.gap_count += 1;
        }
    }

    /// Charges entry `i` the gap between `pred` and an observation.
    pub fn record_prediction(&mut self, i: usize, pred: &Prediction, accuracy: f64, latency: f64) {
        let e = &mut self.entries[i];
        e.gap_sum += prediction_gap(pred, accuracy, latency);
        e.gap_count += 1;
    }

    /// Indices of the `top_k` entries with the smallest gaps (ties by age).
    pub fn top(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.entries.len()).collect();
        idx.sort_by(|&a, &b| self.entries[a].gap().total_cmp(&self.entries[b].gap()).then(a.cmp(&b)));
        idx.truncate(self.top_k);
        idx
    }

    /// Smallest gap among the top entries.
    pub fn best_gap(&self) -> Option<f64> {
        self.top().first().map(|&i| self.entries[i].gap())
    }

    /// Normalized vote weights `∝ 1 / (gap + ε)` of the top entries.
    pub fn vote_weights(&self) -> Vec<(usize, f64)> {
        let top = self.top();
        let raw: Vec<f64> = top.iter().map(|&i| 1.0 / (self.entries[i].gap() + GAP_EPSILON)).collect();
        let total: f64 = raw.iter().sum();
        top.into_iter().zip(raw).map(|(i, w)| (i, w / total)).collect()
    }

    pub fn entry(&self, i: usize) -> &HistoryEntry {
        &self.entries[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cost() -> CostModel {
        CostModel {
            expected_cases: 50.0,
            price_per_gpu_hour: 3.67,
        }
    }

    #[test]
    fn certain_prediction_gives_inverse_cost() {
        let p = Prediction {
            accuracy: 0.9,
            accuracy_std: 0.0,
            log_latency: 0.5f64.ln(),
            log_latency_std: 0.0,
        };
        let u = utility(&p, 0.8, 1.0, &cost());
        assert!((u - 1.0 / cost().dollars(0.5)).abs() / u < 1e-12);
    }

    #[test]
    fn accuracy_at_threshold_is_half() {
        assert_eq!(prob_at_least(0.7, 0.1, 0.7), 0.5);
        assert_eq!(prob_at_least(0.7, 0.0, 0.7), 0.5);
    }

    #[test]
    fn own_gap_window() {
        let mut s = SurrogatePair::new();
        let plan = PlanPoint::over_provisioned(vec![0, 1], vec![0, 1]);
        assert!(s.own_gap().is_infinite());
        s.observe(&plan, 0.8, 0.2);
        assert!(s.own_gap().is_infinite());
        for i in 0..8 {
            let p = PlanPoint::over_provisioned(vec![i % 3, 1], vec![0, 1]);
            s.observe(&p, 0.5 + 0.01 * i as f64, 0.2);
        }
        assert_eq!(s.recent_gaps.len(), GAP_WINDOW);
    }

    #[test]
    fn equal_gaps_give_equal_votes() {
        let mut h = HistoryStore::new(4, 10);
        h.push("a", SurrogatePair::new());
        h.push("b", SurrogatePair::new());
        let w = h.vote_weights();
        assert_eq!(w.len(), 2);
        assert!((w[0].1 - 0.5).abs() < 1e-12);
    }
}
