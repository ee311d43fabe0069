use std::path::Path;
use std::time::Instant;

use proptest::prelude::*;
use serde::Deserialize;

use pipeplan::model::{Fraction, PlanPoint};
use pipeplan::sched::{
    aged_weight, fcfs, greedy_cost, greedy_goodput, ilp_oracle_limited, ilp_oracle_unlimited, random_instance, Cluster,
    DeploymentState, QueryCandidates, ScoredPlan,
};

fn cluster(machines: Vec<u32>) -> Cluster {
    let machine_cost = [2.48, 3.67, 1.5][..machines.len()].to_vec();
    Cluster { machines, machine_cost }
}

fn check_accounting(state: &DeploymentState) {
    let mut used: Vec<Vec<u32>> = state.residual.iter().map(|r| vec![0; r.len()]).collect();
    for a in state.admitted.values() {
        for (&(t, m), &(_, e)) in a.machines.iter().zip(&a.plan.items) {
            used[t][m] += e;
        }
    }
    for (t, r) in state.residual.iter().enumerate() {
        for (m, &free) in r.iter().enumerate() {
            assert_eq!(free + used[t][m], 8, "tier {t} machine {m}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn capacity_is_never_overdrawn(seed in any::<u64>(), n in 1usize..10, m0 in 1u32..4, m1 in 1u32..4, releases in prop::collection::vec(0u64..10, 0..6)) {
        let c = cluster(vec![m0, m1]);
        let inst = random_instance(seed, n, 4, &c);
        let mut s = greedy_goodput(&inst, DeploymentState::new(c.clone()));
        check_accounting(&s);
        for q in releases {
            s.release(q);
            check_accounting(&s);
        }
        s = greedy_goodput(&inst, s);
        check_accounting(&s);
        for (q, a) in &s.admitted {
            let cands = inst.iter().find(|c| c.query == *q).unwrap();
            prop_assert!(cands.plans.contains(&a.plan));
        }
        let f = fcfs(&inst, DeploymentState::new(c));
        check_accounting(&f);
    }

    #[test]
    fn greedy_never_beats_the_optimum(seed in any::<u64>(), n in 1usize..7) {
        let c = cluster(vec![2, 2]);
        let inst = random_instance(seed, n, 3, &c);
        let g = greedy_goodput(&inst, DeploymentState::new(c.clone())).goodput_weight();
        let opt = ilp_oracle_limited(&inst, &c).unwrap().goodput;
        prop_assert!(g <= opt + 1e-9);
        let gc = greedy_cost(&inst, &c);
        let oc = ilp_oracle_unlimited(&inst, &c).unwrap();
        prop_assert!(gc.unserved.is_empty());
        prop_assert!(gc.dollars_per_hour >= oc.dollars_per_hour - 1e-9);
    }

    #[test]
    fn more_capacity_never_lowers_goodput(seed in any::<u64>(), n in 1usize..9, m0 in 0u32..3, m1 in 0u32..3, tier in 0usize..2) {
        let small = cluster(vec![m0, m1]);
        let mut bigger = small.clone();
        bigger.machines[tier] += 1;
        let inst = random_instance(seed, n, 4, &small);
        let a = greedy_goodput(&inst, DeploymentState::new(small)).goodput_weight();
        let b = greedy_goodput(&inst, DeploymentState::new(bigger)).goodput_weight();
        prop_assert!(b >= a, "{a} -> {b}");
    }

    #[test]
    fn enough_capacity_admits_everyone(seed in any::<u64>(), n in 1usize..12) {
        let probe = cluster(vec![1, 1]);
        let inst = random_instance(seed, n, 4, &probe);
        let ops = inst.iter().map(|q| q.plans[0].items.len() as u32).sum::<u32>();
        let c = cluster(vec![ops, ops]);
        let s = greedy_goodput(&inst, DeploymentState::new(c));
        prop_assert_eq!(s.admitted_count(), n);
    }

    #[test]
    fn equal_ratios_make_greedy_exact(seed in any::<u64>(), n in 1usize..8, machines in 1u32..4) {
        // One full-machine plan per query on a single tier: every cr is 1.
        let c = Cluster { machines: vec![machines], machine_cost: vec![3.0] };
        let inst: Vec<QueryCandidates> = random_instance(seed, n, 1, &c)
            .into_iter()
            .map(|mut q| {
                let plan = PlanPoint { configuration: vec![0], placement: vec![0], resources: vec![Fraction::Full] };
                q.plans = vec![ScoredPlan::new(q.query, q.weight, plan, &c)];
                q
            })
            .collect();
        let weights = |qs: Vec<u64>| {
            let mut w: Vec<f64> = qs.iter().map(|&q| inst[q as usize].weight).collect();
            w.sort_by(f64::total_cmp);
            w
        };
        let g = greedy_goodput(&inst, DeploymentState::new(c.clone()));
        let opt = ilp_oracle_limited(&inst, &c).unwrap();
        prop_assert_eq!(weights(g.admitted.keys().copied().collect()), weights(opt.chosen.keys().copied().collect()));
    }
}

#[derive(Deserialize)]
struct FixturePlan {
    placement: Vec<usize>,
    resources: Vec<Fraction>,
}

#[derive(Deserialize)]
struct FixtureQuery {
    weight: f64,
    plans: Vec<FixturePlan>,
}

#[derive(Deserialize)]
struct Expected {
    chosen: Vec<usize>,
    goodput: f64,
    hourly_cost: f64,
    residual: Vec<Vec<u32>>,
}

#[derive(Deserialize)]
struct HandSolved {
    cluster: Cluster,
    queries: Vec<FixtureQuery>,
    expected: Expected,
}

#[test]
fn hand_solved_three_queries() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/scheduler/three_queries.json");
    let f: HandSolved = pipeplan::io::read_json(path).unwrap();
    let inst: Vec<QueryCandidates> = f
        .queries
        .iter()
        .enumerate()
        .map(|(i, q)| QueryCandidates {
            query: i as u64,
            weight: q.weight,
            arrival_order: i,
            plans: q
                .plans
                .iter()
                .map(|p| {
                    let plan = PlanPoint {
                        configuration: vec![0; p.placement.len()],
                        placement: p.placement.clone(),
                        resources: p.resources.clone(),
                    };
                    ScoredPlan::new(i as u64, q.weight, plan, &f.cluster)
                })
                .collect(),
        })
        .collect();
    let s = greedy_goodput(&inst, DeploymentState::new(f.cluster.clone()));
    for (i, &want) in f.expected.chosen.iter().enumerate() {
        assert_eq!(s.admitted[&(i as u64)].plan, inst[i].plans[want], "query {i}");
    }
    assert_eq!(s.goodput_weight(), f.expected.goodput);
    assert_eq!(s.hourly_cost(), f.expected.hourly_cost);
    assert_eq!(s.residual, f.expected.residual);
    assert_eq!(ilp_oracle_limited(&inst, &f.cluster).unwrap().goodput, f.expected.goodput);
}

#[test]
fn starved_query_is_admitted_at_the_crossover() {
    // One machine; every 10 s the running query ends and a fresh weight-3
    // query competes with a weight-1 query waiting since t = 0. Aged weight
    // 1 + 0.01 t reaches 3 at t = 200, where the earlier arrival wins the tie.
    let beta = 0.01;
    let c = Cluster { machines: vec![1], machine_cost: vec![3.0] };
    let plan = PlanPoint { configuration: vec![0], placement: vec![0], resources: vec![Fraction::Full] };
    let mut admitted_at = None;
    for epoch in 0..100u64 {
        let now = 10.0 * epoch as f64;
        let old = QueryCandidates {
            query: 0,
            weight: aged_weight(1.0, now, beta),
            arrival_order: 0,
            plans: vec![ScoredPlan::new(0, aged_weight(1.0, now, beta), plan.clone(), &c)],
        };
        let fresh = QueryCandidates {
            query: epoch + 1,
            weight: 3.0,
            arrival_order: epoch as usize + 1,
            plans: vec![ScoredPlan::new(epoch + 1, 3.0, plan.clone(), &c)],
        };
        let s = greedy_goodput(&[fresh, old], DeploymentState::new(c.clone()));
        assert_eq!(s.admitted_count(), 1);
        if s.is_admitted(0) {
            admitted_at = Some(now);
            break;
        }
    }
    let crossover = (3.0 / 1.0 - 1.0) / beta;
    assert_eq!(admitted_at, Some(crossover));
}

#[test]
fn runtime_scales_near_linearly_in_plans() {
    let c = cluster(vec![2, 2]);
    let mut points = Vec::new();
    for &queries in &[40usize, 160, 640, 4000] {
        let inst = random_instance(queries as u64, queries, 4, &c);
        let plans: usize = inst.iter().map(|q| q.plans.len()).sum();
        let best = (0..5)
            .map(|_| {
                let t = Instant::now();
                std::hint::black_box(greedy_goodput(&inst, DeploymentState::new(c.clone())));
                t.elapsed().as_secs_f64()
            })
            .fold(f64::INFINITY, f64::min);
        points.push(((plans as f64).ln(), best.ln()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!(slope <= 1.2, "log-log slope {slope:.3}");
}
