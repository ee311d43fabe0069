//! Multi-query scheduling: pick at most one candidate plan per query and
//! pack its operators onto machines, either maximizing served weight on a
//! fixed cluster or minimizing dollars on an elastic one.
//!
//! Resource shares are counted in eighths of a machine, so packing is exact.

mod oracle;

pub use oracle::{ilp_oracle_limited, ilp_oracle_unlimited, min_bins, LimitedOptimum, UnlimitedOptimum, ORACLE_MAX_QUERIES};

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{Fraction, PlanPoint, Query, TierTopology};
use crate::rng::seeded;
use crate::search::{single_query_search, CandidateSet, HistoryStore, SearchConfig, SearchOutcome, SurrogatePair};
use crate::workload::Workload;

/// Machines per tier and what one machine costs per hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub machines: Vec<u32>,
    pub machine_cost: Vec<f64>,
}

impl Cluster {
    pub fn from_topology(topology: &TierTopology) -> Self {
        Self {
            machines: topology.tiers().iter().map(|t| t.machine_count).collect(),
            machine_cost: topology.tiers().iter().map(|t| t.machine_cost()).collect(),
        }
    }

    pub fn tiers(&self) -> usize {
        self.machines.len()
    }
}

/// One schedulable plan of one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPlan {
    pub query: u64,
    pub plan: PlanPoint,
    /// `(tier, eighths)` per operator.
    pub items: Vec<(usize, u32)>,
    /// Per-tier demand in machines.
    pub tier_demand: Vec<f64>,
    /// Aggregate demand: per-tier demand summed across tiers.
    pub cr: f64,
    /// Dollars per hour.
    pub cost: f64,
    pub weight: f64,
}

impl ScoredPlan {
    pub fn new(query: u64, weight: f64, plan: PlanPoint, cluster: &Cluster) -> Self {
        let items: Vec<(usize, u32)> = plan
            .placement
            .iter()
            .zip(&plan.resources)
            .map(|(&t, f)| (t, f.eighths()))
            .collect();
        let mut tier_demand = vec![0.0; cluster.tiers()];
        let mut cost = 0.0;
        for &(t, e) in &items {
            tier_demand[t] += e as f64 / 8.0;
            cost += e as f64 / 8.0 * cluster.machine_cost[t];
        }
        Self {
            query,
            cr: tier_demand.iter().sum(),
            tier_demand,
            cost,
            weight,
            items,
            plan,
        }
    }
}

/// A query's schedulable alternatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryCandidates {
    pub query: u64,
    pub weight: f64,
    /// Position in arrival order, for tie-breaking.
    pub arrival_order: usize,
    pub plans: Vec<ScoredPlan>,
}

impl QueryCandidates {
    pub fn from_set(query: u64, weight: f64, arrival_order: usize, set: &CandidateSet, cluster: &Cluster) -> Self {
        Self {
            query,
            weight,
            arrival_order,
            plans: set
                .candidates
                .iter()
                .map(|c| ScoredPlan::new(query, weight, c.plan.clone(), cluster))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub plan: ScoredPlan,
    /// `(tier, machine)` per operator.
    pub machines: Vec<(usize, usize)>,
}

/// Residual capacity of every machine and who holds it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentState {
    pub cluster: Cluster,
    /// Free eighths per machine, per tier.
    pub residual: Vec<Vec<u32>>,
    pub admitted: BTreeMap<u64, Assignment>,
}

impl DeploymentState {
    pub fn new(cluster: Cluster) -> Self {
        Self {
            residual: cluster.machines.iter().map(|&m| vec![8; m as usize]).collect(),
            cluster,
            admitted: BTreeMap::new(),
        }
    }

    pub fn is_admitted(&self, query: u64) -> bool {
        self.admitted.contains_key(&query)
    }

    pub fn admitted_count(&self) -> usize {
        self.admitted.len()
    }

    pub fn goodput_weight(&self) -> f64 {
        self.admitted.values().map(|a| a.plan.weight).sum()
    }

    /// Dollars per hour of the admitted plans' resource shares.
    pub fn hourly_cost(&self) -> f64 {
        self.admitted.values().map(|a| a.plan.cost).sum()
    }

    /// First-fit-decreasing placement of the plan's operators; `None` if
    /// some operator finds no machine.
    pub fn fit(&self, plan: &ScoredPlan) -> Option<Vec<(usize, usize)>> {
        fit_into(&mut self.residual.clone(), plan)
    }

    /// Admits `plan` if its query is new and it fits.
    pub fn try_admit(&mut self, plan: &ScoredPlan) -> bool {
        if self.is_admitted(plan.query) {
            return false;
        }
        let Some(machines) = self.fit(plan) else {
            return false;
        };
        self.place(plan, machines);
        true
    }

    fn place(&mut self, plan: &ScoredPlan, machines: Vec<(usize, usize)>) {
        for (&(tier, m), &(_, size)) in machines.iter().zip(&plan.items) {
            self.residual[tier][m] -= size;
        }
        self.admitted.insert(
            plan.query,
            Assignment {
                plan: plan.clone(),
                machines,
            },
        );
    }

    /// Frees a query's machines; returns whether it was admitted.
    pub fn release(&mut self, query: u64) -> bool {
        let Some(a) = self.admitted.remove(&query) else {
            return false;
        };
        for (&(tier, m), &(_, size)) in a.machines.iter().zip(&a.plan.items) {
            self.residual[tier][m] += size;
        }
        true
    }

    /// Deployment snapshot as CSV: one row per admitted operator.
    pub fn snapshot_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["query", "operator", "tier", "machine", "eighths", "weight", "plan_cost"])?;
        for (q, a) in &self.admitted {
            for (op, (&(tier, m), &(_, size))) in a.machines.iter().zip(&a.plan.items).enumerate() {
                w.write_record([
                    q.to_string(),
                    op.to_string(),
                    tier.to_string(),
                    m.to_string(),
                    size.to_string(),
                    a.plan.weight.to_string(),
                    a.plan.cost.to_string(),
                ])?;
            }
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?).expect("csv is utf-8"))
    }
}

fn fit_into(residual: &mut [Vec<u32>], plan: &ScoredPlan) -> Option<Vec<(usize, usize)>> {
    let mut order: Vec<usize> = (0..plan.items.len()).collect();
    order.sort_by(|&a, &b| plan.items[b].1.cmp(&plan.items[a].1).then(a.cmp(&b)));
    let mut machines = vec![(0, 0); plan.items.len()];
    let mut taken: Vec<(usize, usize, u32)> = Vec::with_capacity(order.len());
    for i in order {
        let (tier, size) = plan.items[i];
        let Some(m) = residual.get(tier).and_then(|r| r.iter().position(|&r| r >= size)) else {
            for &(t, m, e) in &taken {
                residual[t][m] += e;
            }
            return None;
        };
        residual[tier][m] -= size;
        taken.push((tier, m, size));
        machines[i] = (tier, m);
    }
    Some(machines)
}

/// Admits plans in descending `w / cr` order (ties: cheaper, then earlier
/// arrival) while they fit, at most one per query.
///
/// The pass is repeated with only the first `k_t` empty machines of each
/// tier open, for every combination of `k_t`, and the heaviest outcome is
/// kept (the all-open pass wins ties). Opening machines can then never
/// lower the admitted weight.
pub fn greedy_goodput(candidates: &[QueryCandidates], state: DeploymentState) -> DeploymentState {
    let mut state = state;
    let mut ranked: Vec<(&QueryCandidates, &ScoredPlan)> = candidates
        .iter()
        .flat_map(|q| q.plans.iter().map(move |p| (q, p)))
        .collect();
    ranked.sort_by(|(qa, a), (qb, b)| {
        (b.weight / b.cr)
            .total_cmp(&(a.weight / a.cr))
            .then(a.cost.total_cmp(&b.cost))
            .then(qa.arrival_order.cmp(&qb.arrival_order))
    });
    let empty: Vec<Vec<usize>> = state
        .residual
        .iter()
        .map(|r| (0..r.len()).filter(|&m| r[m] == 8).collect())
        .collect();
    let mut open: Vec<usize> = empty.iter().map(Vec::len).collect();
    let mut best: Option<(f64, Vec<(usize, Vec<(usize, usize)>)>)> = None;
    loop {
        let mut residual = state.residual.clone();
        for (t, e) in empty.iter().enumerate() {
            for &m in &e[open[t]..] {
                residual[t][m] = 0;
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut picked = Vec::new();
        let mut weight = 0.0;
        for (i, (q, p)) in ranked.iter().enumerate() {
            if state.is_admitted(q.query) || seen.contains(&q.query) {
                continue;
            }
            if let Some(machines) = fit_into(&mut residual, p) {
                seen.insert(q.query);
                picked.push((i, machines));
                weight += p.weight;
            }
        }
        if best.as_ref().is_none_or(|b: &(f64, _)| weight > b.0) {
            best = Some((weight, picked));
        }
        // Odometer over the open counts, counting down from all open.
        let Some(t) = (0..open.len()).find(|&t| open[t] > 0) else {
            break;
        };
        open[t] -= 1;
        for (u, o) in open.iter_mut().enumerate().take(t) {
            *o = empty[u].len();
        }
    }
    for (i, machines) in best.map(|b| b.1).unwrap_or_default() {
        state.place(ranked[i].1, machines);
    }
    state
}

/// Admits queries in arrival order with each one's cheapest plan, skipping
/// any that does not fit.
pub fn fcfs(candidates: &[QueryCandidates], state: DeploymentState) -> DeploymentState {
    let mut state = state;
    let mut order: Vec<&QueryCandidates> = candidates.iter().collect();
    order.sort_by_key(|q| q.arrival_order);
    for q in order {
        if let Some(p) = q.plans.iter().min_by(|a, b| a.cost.total_cmp(&b.cost).then(a.cr.total_cmp(&b.cr))) {
            state.try_admit(p);
        }
    }
    state
}

/// Elastic deployment: chosen plan per query and machines opened per tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostDeployment {
    pub chosen: BTreeMap<u64, ScoredPlan>,
    pub unserved: Vec<u64>,
    pub machines: Vec<u32>,
    pub dollars_per_hour: f64,
}

/// First-fit-decreasing bin count for item sizes in eighths.
pub fn ffd_bins(items: &[u32]) -> u32 {
    let mut sorted = items.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let mut bins: Vec<u32> = Vec::new();
    for s in sorted {
        match bins.iter_mut().find(|r| **r >= s) {
            Some(r) => *r -= s,
            None => bins.push(8 - s),
        }
    }
    bins.len() as u32
}

/// Each query takes its best benefit-per-dollar plan; machines are then
/// opened per tier by first-fit-decreasing.
pub fn greedy_cost(candidates: &[QueryCandidates], cluster: &Cluster) -> CostDeployment {
    let mut chosen = BTreeMap::new();
    let mut unserved = Vec::new();
    for q in candidates {
        let best = q.plans.iter().reduce(|best, p| {
            let (rb, rp) = (best.weight / best.cost.max(1e-12), p.weight / p.cost.max(1e-12));
            if rp > rb || (rp == rb && p.cr < best.cr) {
                p
            } else {
                best
            }
        });
        match best {
            Some(p) => {
                chosen.insert(q.query, p.clone());
            }
            None => unserved.push(q.query),
        }
    }
    let (machines, dollars_per_hour) = price_packing(chosen.values(), cluster, ffd_bins);
    CostDeployment {
        chosen,
        unserved,
        machines,
        dollars_per_hour,
    }
}

pub(crate) fn price_packing<'a>(
    plans: impl Iterator<Item = &'a ScoredPlan>,
    cluster: &Cluster,
    bins: impl Fn(&[u32]) -> u32,
) -> (Vec<u32>, f64) {
    let mut per_tier: Vec<Vec<u32>> = vec![Vec::new(); cluster.tiers()];
    for p in plans {
        for &(t, e) in &p.items {
            per_tier[t].push(e);
        }
    }
    let machines: Vec<u32> = per_tier.iter().map(|items| bins(items)).collect();
    let dollars = machines
        .iter()
        .zip(&cluster.machine_cost)
        .map(|(&m, &c)| m as f64 * c)
        .sum();
    (machines, dollars)
}

/// `w0 * (1 + beta * pending_seconds)`.
pub fn aged_weight(base_weight: f64, pending_seconds: f64, beta: f64) -> f64 {
    base_weight * (1.0 + beta * pending_seconds.max(0.0))
}

/// A query waiting for admission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingQuery {
    pub query: u64,
    pub base_weight: f64,
    pub since: f64,
    pub weight: f64,
}

/// Refreshes every pending query's aged weight at time `now`.
pub fn age_weights(pending: &mut [PendingQuery], now: f64, beta: f64) {
    for p in pending {
        p.weight = aged_weight(p.base_weight, now - p.since, beta);
    }
}

/// Seeded random scheduling instance: `queries` queries with 1..=`max_plans`
/// plans each, weights uniform in [1, 4). A query's plans share its operator
/// count (1..=3) and differ in tiers and fractions.
pub fn random_instance(seed: u64, queries: usize, max_plans: usize, cluster: &Cluster) -> Vec<QueryCandidates> {
    let mut rng = seeded(seed);
    (0..queries)
        .map(|q| {
            let weight = rng.random_range(1.0..4.0);
            let n_plans = rng.random_range(1..=max_plans.max(1));
            let ops = rng.random_range(1..=3);
            let plans = (0..n_plans)
                .map(|_| {
                    let mut placement: Vec<usize> = (0..ops).map(|_| rng.random_range(0..cluster.tiers())).collect();
                    placement.sort_unstable();
                    let resources = (0..ops).map(|_| Fraction::GRID[rng.random_range(0..4)]).collect();
                    let plan = PlanPoint {
                        configuration: vec![0; ops],
                        placement,
                        resources,
                    };
                    ScoredPlan::new(q as u64, weight, plan, cluster)
                })
                .collect();
            QueryCandidates {
                query: q as u64,
                weight,
                arrival_order: q,
                plans,
            }
        })
        .collect()
}

/// Result of replanning one query after drift.
#[derive(Debug, Clone)]
pub struct Replan {
    pub outcome: SearchOutcome,
    /// No compliant plan was found: the query must give up its resources.
    pub degraded: bool,
}

/// Searches again under the drifted `workload`, starting from the query's
/// previous surrogates.
pub fn replan(
    query: &Query,
    workload: &Workload,
    prior: &SurrogatePair,
    history: &HistoryStore,
    config: &SearchConfig,
) -> Result<Replan> {
    let outcome = single_query_search(query, workload, history, config, Some(prior.clone()))?;
    Ok(Replan {
        degraded: outcome.candidates.is_empty(),
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan_on(tier: usize, f: Fraction) -> PlanPoint {
        PlanPoint {
            configuration: vec![0],
            placement: vec![tier],
            resources: vec![f],
        }
    }

    fn one_tier(machines: u32) -> Cluster {
        Cluster {
            machines: vec![machines],
            machine_cost: vec![3.0],
        }
    }

    #[test]
    fn ratio_order_decides() {
        let c = one_tier(1);
        let mk = |q: u64, w: f64| QueryCandidates {
            query: q,
            weight: w,
            arrival_order: q as usize,
            plans: vec![ScoredPlan::new(q, w, plan_on(0, Fraction::Full), &c)],
        };
        // Two 0.6-machine demands cannot share one machine; eighths model
        // that with full-machine plans.
        let s = greedy_goodput(&[mk(0, 1.0), mk(1, 2.0)], DeploymentState::new(c));
        assert!(s.is_admitted(1) && !s.is_admitted(0));
    }

    #[test]
    fn release_restores_capacity() {
        let c = one_tier(2);
        let mut s = DeploymentState::new(c.clone());
        let p = ScoredPlan::new(7, 1.0, plan_on(0, Fraction::Half), &c);
        assert!(s.try_admit(&p));
        assert!(!s.try_admit(&p));
        assert_eq!(s.residual, vec![vec![4, 8]]);
        assert!(s.release(7));
        assert_eq!(s.residual, vec![vec![8, 8]]);
    }

    #[test]
    fn ffd_packs_halves_together() {
        assert_eq!(ffd_bins(&[4, 4]), 1);
        assert_eq!(ffd_bins(&[8, 1, 1, 2, 4]), 2);
        assert_eq!(ffd_bins(&[]), 0);
    }

    #[test]
    fn cheaper_plan_wins_on_cost() {
        let c = Cluster {
            machines: vec![4, 4],
            machine_cost: vec![1.0, 2.0],
        };
        let q = QueryCandidates {
            query: 0,
            weight: 1.0,
            arrival_order: 0,
            plans: vec![
                ScoredPlan::new(0, 1.0, plan_on(1, Fraction::Full), &c),
                ScoredPlan::new(0, 1.0, plan_on(0, Fraction::Full), &c),
            ],
        };
        let d = greedy_cost(&[q], &c);
        assert_eq!(d.chosen[&0].cost, 1.0);
        assert_eq!(d.dollars_per_hour, 1.0);
    }

    #[test]
    fn aging() {
        assert_eq!(aged_weight(3.0, 0.0, 0.01), 3.0);
        assert!((aged_weight(1.0, 100.0, 0.01) - 2.0).abs() < 1e-12);
    }
}
