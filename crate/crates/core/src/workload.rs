use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::landscape::{GroundTruthLandscape, TruePlanMetrics};
use crate::latency::{pipeline_latency, LatencyBreakdown, OperatorProfile};
use crate::model::{PipelineSpec, PlanPoint, PlanSpace, Query, TierTopology};

/// A pipeline on a topology with the ground truth that answers for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub pipeline: PipelineSpec,
    pub topology: TierTopology,
    pub landscape: GroundTruthLandscape,
}

impl Workload {
    pub fn new(pipeline: PipelineSpec, topology: TierTopology, landscape: GroundTruthLandscape) -> Self {
        Self {
            pipeline,
            topology,
            landscape,
        }
    }

    pub fn latency(&self, plan: &PlanPoint) -> Result<f64> {
        self.breakdown(plan).map(|b| b.total)
    }

    pub fn breakdown(&self, plan: &PlanPoint) -> Result<LatencyBreakdown> {
        pipeline_latency(plan, &self.pipeline, &self.topology, &self.landscape)
    }

    pub fn true_metrics(&self, plan: &PlanPoint) -> Result<TruePlanMetrics> {
        self.landscape.true_metrics(plan, &self.pipeline, &self.topology)
    }

    /// Per-operator compute seconds of one profiling case on the reference tier.
    pub fn profiling_seconds(&self, configuration: &[usize]) -> Vec<f64> {
        let speed = self.topology.tier(self.topology.reference_tier()).speed_factor;
        (0..self.pipeline.len())
            .map(|i| self.landscape.base_compute(i, configuration) * speed)
            .collect()
    }

    /// Price of one GPU-hour on the reference tier.
    pub fn reference_price(&self) -> f64 {
        self.topology.tier(self.topology.reference_tier()).machine_cost()
    }

    /// Whether some over-provisioned plan truly meets both SLOs of `query`.
    pub fn feasible_plan_exists(&self, query: &Query) -> Result<bool> {
        let space = PlanSpace::search(&self.pipeline, &self.topology);
        let per_config = space.len() / space.config_count().max(1);
        for c in 0..space.config_count() {
            if self.landscape.true_accuracy(&space.config(c)) < query.a_slo {
                continue;
            }
            for k in 0..per_config {
                if self.latency(&space.plan(c * per_config + k))? <= query.l_slo {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    /// `(accuracy, latency)` points no configuration beats on both axes,
    /// using each configuration's fastest full-resource placement; sorted
    /// by latency.
    pub fn accuracy_latency_frontier(&self) -> Result<Vec<(f64, f64)>> {
        let space = PlanSpace::search(&self.pipeline, &self.topology);
        let per_config = space.len() / space.config_count().max(1);
        let mut points = Vec::with_capacity(space.config_count() as usize);
        for c in 0..space.config_count() {
            let accuracy = self.landscape.true_accuracy(&space.config(c));
            let mut best = f64::INFINITY;
            for k in 0..per_config {
                best = best.min(self.latency(&space.plan(c * per_config + k))?);
            }
            points.push((accuracy, best));
        }
        points.sort_by(|a, b| a.1.total_cmp(&b.1).then(b.0.total_cmp(&a.0)));
        let mut front: Vec<(f64, f64)> = Vec::new();
        for p in points {
            if front.last().is_none_or(|last| p.0 > last.0) {
                front.push(p);
            }
        }
        Ok(front)
    }
}
