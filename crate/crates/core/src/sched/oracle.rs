//! Exact optima of the scheduling integer programs by exhaustive search,
//! for verifying the greedy schedulers on small instances.

use std::collections::{BTreeMap, HashMap};

use super::{price_packing, Cluster, QueryCandidates, ScoredPlan};
use crate::error::{PlanError, Result};

pub const ORACLE_MAX_QUERIES: usize = 8;
const ORACLE_MAX_PLANS: usize = 8;
const ORACLE_MAX_MACHINES: u32 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct LimitedOptimum {
    pub goodput: f64,
    /// Chosen plan index per admitted query.
    pub chosen: BTreeMap<u64, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnlimitedOptimum {
    pub dollars_per_hour: f64,
    pub chosen: BTreeMap<u64, usize>,
    pub machines: Vec<u32>,
}

fn check_size(candidates: &[QueryCandidates]) -> Result<()> {
    if candidates.len() > ORACLE_MAX_QUERIES {
        return Err(PlanError::InstanceTooLarge(format!(
            "{} queries (limit {ORACLE_MAX_QUERIES})",
            candidates.len()
        )));
    }
    if let Some(q) = candidates.iter().find(|q| q.plans.len() > ORACLE_MAX_PLANS) {
        return Err(PlanError::InstanceTooLarge(format!(
            "query {} has {} plans (limit {ORACLE_MAX_PLANS})",
            q.query,
            q.plans.len()
        )));
    }
    Ok(())
}

/// Every way to put a plan's operators on machines with room, as the
/// resulting residual vectors (sorted per tier, since machines of a tier
/// are interchangeable).
fn placements(plan: &ScoredPlan, residual: &[Vec<u32>]) -> Vec<Vec<Vec<u32>>> {
    fn rec(items: &[(usize, u32)], residual: &mut Vec<Vec<u32>>, out: &mut Vec<Vec<Vec<u32>>>) {
        let Some((&(tier, size), rest)) = items.split_first() else {
            let mut r = residual.clone();
            r.iter_mut().for_each(|t| t.sort_unstable());
            out.push(r);
            return;
        };
        let Some(machines) = residual.get(tier) else {
            return;
        };
        for m in 0..machines.len() {
            if residual[tier][m] >= size && (m == 0 || residual[tier][..m].iter().all(|&r| r != residual[tier][m])) {
                residual[tier][m] -= size;
                rec(rest, residual, out);
                residual[tier][m] += size;
            }
        }
    }
    let mut out = Vec::new();
    rec(&plan.items, &mut residual.to_vec(), &mut out);
    out.sort();
    out.dedup();
    out
}

/// Maximum total weight of queries that can be served at once on `cluster`,
/// one plan per served query and each operator on one machine of its tier.
pub fn ilp_oracle_limited(candidates: &[QueryCandidates], cluster: &Cluster) -> Result<LimitedOptimum> {
    check_size(candidates)?;
    if cluster.machines.iter().sum::<u32>() > ORACLE_MAX_MACHINES {
        return Err(PlanError::InstanceTooLarge(format!(
            "{} machines (limit {ORACLE_MAX_MACHINES})",
            cluster.machines.iter().sum::<u32>()
        )));
    }
    type Memo = HashMap<(usize, Vec<Vec<u32>>), (f64, Option<usize>, Vec<Vec<u32>>)>;
    fn best(i: usize, residual: Vec<Vec<u32>>, qs: &[QueryCandidates], memo: &mut Memo) -> f64 {
        if i == qs.len() {
            return 0.0;
        }
        let key = (i, residual);
        if let Some(v) = memo.get(&key) {
            return v.0;
        }
        let residual = key.1.clone();
        let mut value = best(i + 1, residual.clone(), qs, memo);
        let mut choice = None;
        let mut next = residual.clone();
        for (pi, p) in qs[i].plans.iter().enumerate() {
            for r in placements(p, &residual) {
                let v = p.weight + best(i + 1, r.clone(), qs, memo);
                if v > value {
                    value = v;
                    choice = Some(pi);
                    next = r;
                }
            }
        }
        memo.insert(key, (value, choice, next));
        value
    }
    let start: Vec<Vec<u32>> = cluster.machines.iter().map(|&m| vec![8; m as usize]).collect();
    let mut memo = Memo::new();
    let goodput = best(0, start.clone(), candidates, &mut memo);
    let mut chosen = BTreeMap::new();
    let mut residual = start;
    for (i, q) in candidates.iter().enumerate() {
        let (_, choice, next) = memo.get(&(i, residual.clone())).expect("visited").clone();
        if let Some(pi) = choice {
            chosen.insert(q.query, pi);
            residual = next;
        }
    }
    Ok(LimitedOptimum { goodput, chosen })
}

/// Exact minimum bin count for item sizes in eighths (branch and bound).
pub fn min_bins(items: &[u32]) -> u32 {
    let mut sorted = items.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let lower = sorted.iter().sum::<u32>().div_ceil(8);
    let mut best = super::ffd_bins(&sorted);
    fn rec(i: usize, items: &[u32], bins: &mut Vec<u32>, best: &mut u32, lower: u32) {
        if *best == lower || bins.len() as u32 >= *best {
            return;
        }
        if i == items.len() {
            *best = bins.len() as u32;
            return;
        }
        for b in 0..bins.len() {
            if bins[b] >= items[i] && !bins[..b].contains(&bins[b]) {
                bins[b] -= items[i];
                rec(i + 1, items, bins, best, lower);
                bins[b] += items[i];
            }
        }
        bins.push(8 - items[i]);
        rec(i + 1, items, bins, best, lower);
        bins.pop();
    }
    rec(0, &sorted, &mut Vec::new(), &mut best, lower);
    best
}

/// Cheapest elastic deployment serving every query that has a plan.
pub fn ilp_oracle_unlimited(candidates: &[QueryCandidates], cluster: &Cluster) -> Result<UnlimitedOptimum> {
    check_size(candidates)?;
    let served: Vec<&QueryCandidates> = candidates.iter().filter(|q| !q.plans.is_empty()).collect();
    let mut choice = vec![0usize; served.len()];
    let mut best: Option<UnlimitedOptimum> = None;
    loop {
        let plans = served.iter().zip(&choice).map(|(q, &c)| &q.plans[c]);
        let (machines, dollars) = price_packing(plans, cluster, min_bins);
        if best.as_ref().is_none_or(|b| dollars < b.dollars_per_hour) {
            best = Some(UnlimitedOptimum {
                dollars_per_hour: dollars,
                chosen: served.iter().zip(&choice).map(|(q, &c)| (q.query, c)).collect(),
                machines,
            });
        }
        let mut i = 0;
        loop {
            if i == served.len() {
                return Ok(best.expect("at least one combination"));
            }
            choice[i] += 1;
            if choice[i] < served[i].plans.len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}
