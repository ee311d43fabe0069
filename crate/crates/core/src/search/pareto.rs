//! Resource trimming: from full resources, halve operator shares while the
//! latency SLO holds and keep the cost/latency frontier of what was reached.

use std::collections::{HashSet, VecDeque};

use crate::error::{PlanError, Result};
use crate::landscape::pareto_filter;
use crate::model::{Fraction, PlanPoint};
use crate::workload::Workload;

/// A resource-trimmed plan with its model latency and hourly cost.
#[derive(Debug, Clone, PartialEq)]
pub struct TrimmedPlan {
    pub plan: PlanPoint,
    pub latency: f64,
    pub cost: f64,
}

/// Walks the halving lattice breadth-first from all-ones, stepping only to
/// feasible points. Latency never drops when a share is halved, so every
/// feasible resource vector is reachable this way; the result is the
/// (cost, latency) frontier of all of them.
pub fn pareto_optimize(plan: &PlanPoint, l_slo: f64, workload: &Workload) -> Result<Vec<TrimmedPlan>> {
    let start = plan.with_resources(vec![Fraction::Full; plan.configuration.len()]);
    let latency = workload.latency(&start)?;
    if latency > l_slo {
        return Err(PlanError::InfeasibleAtFullResources { latency, slo: l_slo });
    }
    let mut seen: HashSet<Vec<Fraction>> = HashSet::new();
    let mut queue = VecDeque::new();
    let mut feasible = Vec::new();
    seen.insert(start.resources.clone());
    queue.push_back(TrimmedPlan {
        cost: start.hourly_cost(&workload.topology),
        plan: start,
        latency,
    });
    while let Some(node) = queue.pop_front() {
        for i in 0..node.plan.resources.len() {
            let Some(h) = node.plan.resources[i].halve() else {
                continue;
            };
            let mut r = node.plan.resources.clone();
            r[i] = h;
            if !seen.insert(r.clone()) {
                continue;
            }
            let child = node.plan.with_resources(r);
            let lat = workload.latency(&child)?;
            if lat <= l_slo {
                queue.push_back(TrimmedPlan {
                    cost: child.hourly_cost(&workload.topology),
                    plan: child,
                    latency: lat,
                });
            }
        }
        feasible.push(node);
    }
    Ok(pareto_filter(&feasible, |t| (t.cost, t.latency)))
}
