use proptest::prelude::*;

use pipeplan::latency::{compute_time, pipeline_latency, OperatorProfile};
use pipeplan::model::{Fraction, OperatorSpec, PipelineSpec, PlanPoint, TierTopology};

/// Per-operator times and sizes that ignore the configuration.
#[derive(Debug, Clone)]
struct Table {
    base: Vec<f64>,
    size: Vec<f64>,
}

impl OperatorProfile for Table {
    fn base_compute(&self, op: usize, _: &[usize]) -> f64 {
        self.base[op]
    }

    fn output_size(&self, op: usize, _: &[usize]) -> f64 {
        self.size[op]
    }
}

#[derive(Debug, Clone)]
struct Instance {
    pipeline: PipelineSpec,
    table: Table,
    plan: PlanPoint,
}

/// Random DAG on `n` nodes in topological order. Every node but the last
/// feeds some later node, so the last node is the only sink.
fn instance() -> impl Strategy<Value = Instance> {
    (1usize..=8)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec(any::<u64>(), n),
                prop::collection::vec(any::<u64>(), n),
                prop::collection::vec(1e-3f64..2.0, n),
                prop::collection::vec(1e3f64..1e7, n),
                prop::collection::vec(any::<bool>(), n),
                prop::collection::vec(0usize..4, n),
                prop::collection::vec(0usize..3, n),
            )
        })
        .prop_map(|(n, next, extra, base, size, batching, fracs, tiers)| {
            let mut edges = Vec::new();
            for u in 0..n.saturating_sub(1) {
                let span = (n - 1 - u) as u64;
                edges.push((u, u + 1 + (next[u] % span) as usize));
                let v = u + 1 + (extra[u] % span) as usize;
                if extra[u] % 3 == 0 && !edges.contains(&(u, v)) {
                    edges.push((u, v));
                }
            }
            edges.sort_unstable();
            let ops = (0..n)
                .map(|i| OperatorSpec::new(i, &format!("op{i}"), &["a", "b"], batching[i], size[i]))
                .collect();
            let mut placement = tiers;
            placement.sort_unstable();
            Instance {
                pipeline: PipelineSpec::new("dag", ops, edges).unwrap(),
                table: Table { base, size },
                plan: PlanPoint {
                    configuration: vec![0; n],
                    placement,
                    resources: fracs.iter().map(|&i| Fraction::GRID[i]).collect(),
                },
            }
        })
}

fn random_path(pipeline: &PipelineSpec, picks: &[usize]) -> Vec<usize> {
    // Walk backwards from the sink through arbitrary predecessors.
    let mut path = vec![pipeline.sink()];
    let mut i = 0;
    loop {
        let preds = pipeline.predecessors(*path.last().unwrap());
        if preds.is_empty() {
            break;
        }
        path.push(preds[picks[i % picks.len()] % preds.len()]);
        i += 1;
    }
    path.reverse();
    path
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn total_dominates_every_path(inst in instance(), picks in prop::collection::vec(any::<usize>(), 1..8)) {
        let topo = TierTopology::three_tier_default();
        let b = pipeline_latency(&inst.plan, &inst.pipeline, &topo, &inst.table).unwrap();
        let path = random_path(&inst.pipeline, &picks);
        let mut w = b.compute[path[0]];
        for pair in path.windows(2) {
            let e = b.transfer.iter().find(|e| e.from == pair[0] && e.to == pair[1]).unwrap();
            w += e.seconds + b.compute[pair[1]];
        }
        prop_assert!(b.total >= w * (1.0 - 1e-12), "{} < {}", b.total, w);
        prop_assert_eq!(*b.critical_path.last().unwrap(), inst.pipeline.sink());
    }

    #[test]
    fn halving_a_share_never_speeds_up(inst in instance(), op in any::<usize>()) {
        let topo = TierTopology::three_tier_default();
        let i = op % inst.plan.resources.len();
        let before = pipeline_latency(&inst.plan, &inst.pipeline, &topo, &inst.table).unwrap().total;
        if let Some(h) = inst.plan.resources[i].halve() {
            let mut r = inst.plan.resources.clone();
            r[i] = h;
            let after = pipeline_latency(&inst.plan.with_resources(r), &inst.pipeline, &topo, &inst.table).unwrap().total;
            prop_assert!(after >= before);
        }
        let full = inst.plan.with_resources(vec![Fraction::Full; inst.plan.resources.len()]);
        let at_full = pipeline_latency(&full, &inst.pipeline, &topo, &inst.table).unwrap().total;
        prop_assert!(at_full <= before);
    }

    #[test]
    fn configuration_alone_does_not_move_latency(inst in instance(), cfg in prop::collection::vec(0usize..2, 8)) {
        let topo = TierTopology::three_tier_default();
        let mut other = inst.plan.clone();
        other.configuration = cfg[..other.configuration.len()].to_vec();
        let a = pipeline_latency(&inst.plan, &inst.pipeline, &topo, &inst.table).unwrap();
        let b = pipeline_latency(&other, &inst.pipeline, &topo, &inst.table).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn compute_time_shape(base in 1e-4f64..10.0, k in 1e-3f64..100.0, speed in 0.1f64..5.0, i in 0usize..3, batching in any::<bool>()) {
        let (hi, lo) = (Fraction::GRID[i].value(), Fraction::GRID[i + 1].value());
        let t_hi = compute_time(base, hi, speed, batching).unwrap();
        let t_lo = compute_time(base, lo, speed, batching).unwrap();
        prop_assert!(t_lo >= t_hi);
        let scaled = compute_time(k * base, hi, speed, batching).unwrap();
        prop_assert!((scaled - k * t_hi).abs() <= 1e-12 * scaled.abs());
    }
}

#[test]
fn diamond_follows_the_heavy_branch() {
    let ops = (0..4)
        .map(|i| OperatorSpec::new(i, &format!("op{i}"), &["a"], false, 1e3))
        .collect();
    let pipeline = PipelineSpec::new("diamond", ops, vec![(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap();
    let table = Table {
        base: vec![0.1, 0.2, 1.5, 0.1],
        size: vec![1e3; 4],
    };
    let topo = TierTopology::three_tier_default();
    let plan = PlanPoint::over_provisioned(vec![0; 4], vec![2; 4]);
    let b = pipeline_latency(&plan, &pipeline, &topo, &table).unwrap();
    assert_eq!(b.critical_path, vec![0, 2, 3]);
    let heavy = b.compute[0] + b.transfer[1].seconds + b.compute[2] + b.transfer[3].seconds + b.compute[3];
    assert_eq!(b.total, heavy);
}
