//! Exhaustive ground-truth frontier, for checking planners.

use serde::{Deserialize, Serialize};

use super::GroundTruthLandscape;
use crate::error::{PlanError, Result};
use crate::latency::plan_latency;
use crate::model::{PipelineSpec, PlanPoint, PlanSpace, Query, TierTopology};
use crate::par::Execution;

/// Largest plan space the exhaustive oracle will sweep.
pub const EXHAUSTIVE_LIMIT: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruePlanMetrics {
    pub plan: PlanPoint,
    pub accuracy: f64,
    pub latency: f64,
    /// Dollars per hour.
    pub cost: f64,
}

impl GroundTruthLandscape {
    /// True accuracy, latency and hourly cost of a plan.
    pub fn true_metrics(&self, plan: &PlanPoint, pipeline: &PipelineSpec, topology: &TierTopology) -> Result<TruePlanMetrics> {
        Ok(TruePlanMetrics {
            plan: plan.clone(),
            accuracy: self.true_accuracy(&plan.configuration),
            latency: plan_latency(plan, pipeline, topology, self)?,
            cost: plan.hourly_cost(topology),
        })
    }

    /// Whether the plan truly meets both of the query's SLOs.
    pub fn truly_compliant(&self, plan: &PlanPoint, pipeline: &PipelineSpec, topology: &TierTopology, query: &Query) -> Result<bool> {
        let m = self.true_metrics(plan, pipeline, topology)?;
        Ok(m.accuracy >= query.a_slo && m.latency <= query.l_slo)
    }
}

/// Keeps the points not dominated in (cost, latency). Equal points survive together.
pub fn pareto_filter<T: Clone>(items: &[T], key: impl Fn(&T) -> (f64, f64)) -> Vec<T> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| {
        let (ca, la) = key(&items[a]);
        let (cb, lb) = key(&items[b]);
        ca.total_cmp(&cb).then(la.total_cmp(&lb)).then(a.cmp(&b))
    });
    let mut keep = Vec::new();
    let mut best_cheaper = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        let cost = key(&items[order[i]]).0;
        let group_min = key(&items[order[i]]).1;
        let mut j = i;
        while j < order.len() && key(&items[order[j]]).0 == cost {
            if group_min < best_cheaper && key(&items[order[j]]).1 == group_min {
                keep.push(order[j]);
            }
            j += 1;
        }
        best_cheaper = best_cheaper.min(group_min);
        i = j;
    }
    keep.sort_unstable();
    keep.into_iter().map(|k| items[k].clone()).collect()
}

/// Every SLO-compliant plan not dominated in (hourly cost, latency), found
/// by sweeping the whole plan space.
pub fn true_pareto_set(
    landscape: &GroundTruthLandscape,
    pipeline: &PipelineSpec,
    topology: &TierTopology,
    query: &Query,
) -> Result<Vec<TruePlanMetrics>> {
    true_pareto_set_with(Execution::default(), landscape, pipeline, topology, query)
}

pub fn true_pareto_set_with(
    exec: Execution,
    landscape: &GroundTruthLandscape,
    pipeline: &PipelineSpec,
    topology: &TierTopology,
    query: &Query,
) -> Result<Vec<TruePlanMetrics>> {
    let space = PlanSpace::full(pipeline, topology);
    if space.len() > EXHAUSTIVE_LIMIT {
        return Err(PlanError::SpaceTooLarge {
            count: space.len(),
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let per_config = space.len() / space.config_count();
    let chunks = exec.map_range(space.config_count() as usize, |c| -> Result<Vec<TruePlanMetrics>> {
        let config = space.config(c as u64);
        let accuracy = landscape.true_accuracy(&config);
        if accuracy < query.a_slo {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for k in 0..per_config {
            let plan = space.plan(c as u64 * per_config + k);
            let latency = plan_latency(&plan, pipeline, topology, landscape)?;
            if latency <= query.l_slo {
                let cost = plan.hourly_cost(topology);
                out.push(TruePlanMetrics {
                    plan,
                    accuracy,
                    latency,
                    cost,
                });
            }
        }
        Ok(out)
    });
    let mut compliant = Vec::new();
    for chunk in chunks {
        compliant.extend(chunk?);
    }
    Ok(pareto_filter(&compliant, |m| (m.cost, m.latency)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pareto_filter_brute_force() {
        let pts = vec![(1.0, 5.0), (2.0, 3.0), (2.0, 3.0), (2.0, 4.0), (3.0, 3.0), (4.0, 1.0), (1.0, 6.0)];
        let got = pareto_filter(&pts, |p| *p);
        let brute: Vec<(f64, f64)> = pts
            .iter()
            .filter(|a| !pts.iter().any(|b| b.0 <= a.0 && b.1 <= a.1 && (b.0 < a.0 || b.1 < a.1)))
            .cloned()
            .collect();
        assert_eq!(got, brute);
    }
}
