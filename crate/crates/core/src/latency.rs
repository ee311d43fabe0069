//! End-to-end latency and profiling-cost model.
//!
//! A pipeline's latency is the heaviest path through its DAG, where nodes
//! weigh their compute time on the placed tier and edges weigh the time to
//! move the producer's output across the link between the two tiers.

use serde::{Deserialize, Serialize};

use crate::error::{PlanError, Result};
use crate::model::{Fraction, Link, PipelineSpec, PlanPoint, TierTopology};

/// Per-operator measurements a latency estimate is built from.
pub trait OperatorProfile {
    /// Seconds per item at full resources on the reference tier.
    fn base_compute(&self, op: usize, configuration: &[usize]) -> f64;
    /// Bytes emitted per item by `op` under `configuration`.
    fn output_size(&self, op: usize, configuration: &[usize]) -> f64;
}

/// `L / B + T0`, with `L` in bytes and `B` in Mbps.
pub fn transfer_time(bytes: f64, bandwidth_mbps: f64, fixed_latency: f64) -> Result<f64> {
    if !(bandwidth_mbps > 0.0) {
        return Err(PlanError::NonPositiveBandwidth(bandwidth_mbps));
    }
    Ok(bytes * 8.0 / (bandwidth_mbps * 1e6) + fixed_latency)
}

/// Transfer time over a link; co-located operators hand off for free.
pub fn link_transfer_time(link: Link, bytes: f64) -> Result<f64> {
    match link {
        Link::CoLocated => Ok(0.0),
        Link::Network {
            bandwidth_mbps,
            fixed_latency,
        } => transfer_time(bytes, bandwidth_mbps, fixed_latency),
    }
}

/// Compute seconds for one item given a resource share and tier speed.
///
/// Non-batching operators get `f` of the machine's FLOPS and slow down by
/// `1/f`. Batching operators share a batch instead and keep full speed.
pub fn compute_time(base: f64, fraction: f64, speed_factor: f64, is_batching: bool) -> Result<f64> {
    Fraction::from_value(fraction)?;
    if !(speed_factor > 0.0) {
        return Err(PlanError::InvalidTopology(format!(
            "speed factor {speed_factor} must be positive"
        )));
    }
    Ok(if is_batching {
        base * speed_factor
    } else {
        base * speed_factor / fraction
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeTransfer {
    pub from: usize,
    pub to: usize,
    pub seconds: f64,
}

/// Where a plan's latency comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub compute: Vec<f64>,
    pub transfer: Vec<EdgeTransfer>,
    /// Operators on the heaviest path, source to sink.
    pub critical_path: Vec<usize>,
    pub total: f64,
}

/// Heaviest path in a DAG whose nodes are in topological (index) order.
///
/// Returns the weight of the heaviest path ending at `end` and its nodes.
/// Sums accumulate left to right along the path (node, edge, node, ...).
pub fn longest_path_to(
    node_weights: &[f64],
    preds: impl Fn(usize) -> Vec<(usize, f64)>,
    end: usize,
) -> (f64, Vec<usize>) {
    let n = node_weights.len();
    let mut dist = vec![0.0; n];
    let mut back: Vec<Option<usize>> = vec![None; n];
    for v in 0..n {
        let mut best: Option<(f64, usize)> = None;
        for (u, w) in preds(v) {
            let cand = dist[u] + w;
            if best.is_none_or(|(b, _)| cand > b) {
                best = Some((cand, u));
            }
        }
        dist[v] = match best {
            Some((d, u)) => {
                back[v] = Some(u);
                d + node_weights[v]
            }
            None => node_weights[v],
        };
    }
    let mut path = vec![end];
    while let Some(u) = back[*path.last().unwrap()] {
        path.push(u);
    }
    path.reverse();
    (dist[end], path)
}

/// End-to-end latency of `plan` on `topology`.
pub fn pipeline_latency(
    plan: &PlanPoint,
    pipeline: &PipelineSpec,
    topology: &TierTopology,
    profile: &impl OperatorProfile,
) -> Result<LatencyBreakdown> {
    plan.validate(pipeline, topology)?;
    let cfg = &plan.configuration;
    let compute = pipeline
        .operators()
        .iter()
        .enumerate()
        .map(|(i, op)| {
            compute_time(
                profile.base_compute(i, cfg),
                plan.resources[i].value(),
                topology.tier(plan.placement[i]).speed_factor,
                op.is_batching,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let transfer = pipeline
        .edges()
        .iter()
        .map(|&(u, v)| {
            let link = topology.link(plan.placement[u], plan.placement[v]);
            Ok(EdgeTransfer {
                from: u,
                to: v,
                seconds: link_transfer_time(link, profile.output_size(u, cfg))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (total, critical_path) = longest_path_to(
        &compute,
        |v| {
            transfer
                .iter()
                .filter(|e| e.to == v)
                .map(|e| (e.from, e.seconds))
                .collect()
        },
        pipeline.sink(),
    );
    Ok(LatencyBreakdown {
        compute,
        transfer,
        critical_path,
        total,
    })
}

/// Convenience: only the total.
pub fn plan_latency(
    plan: &PlanPoint,
    pipeline: &PipelineSpec,
    topology: &TierTopology,
    profile: &impl OperatorProfile,
) -> Result<f64> {
    pipeline_latency(plan, pipeline, topology, profile).map(|b| b.total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilingCost {
    pub gpu_seconds: f64,
    pub dollars: f64,
}

impl ProfilingCost {
    pub const ZERO: ProfilingCost = ProfilingCost {
        gpu_seconds: 0.0,
        dollars: 0.0,
    };

    pub fn from_gpu_seconds(gpu_seconds: f64, price_per_gpu_hour: f64) -> Self {
        Self {
            gpu_seconds,
            dollars: gpu_seconds / 3600.0 * price_per_gpu_hour,
        }
    }
}

/// Cost of profiling `cases` items when the first `cached_prefix` operators
/// are served from cache. `per_op_seconds` are reference-tier compute times.
pub fn profiling_cost(
    per_op_seconds: &[f64],
    cached_prefix: usize,
    cases: usize,
    price_per_gpu_hour: f64,
) -> ProfilingCost {
    let per_case: f64 = per_op_seconds.iter().skip(cached_prefix).sum();
    ProfilingCost::from_gpu_seconds(cases as f64 * per_case, price_per_gpu_hour)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::OperatorSpec;

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

    fn chain(n: usize) -> PipelineSpec {
        let ops = (0..n)
            .map(|i| OperatorSpec::new(i, "op", &["x"], false, 1.0))
            .collect();
        PipelineSpec::chain("c", ops).unwrap()
    }

    #[test]
    fn transfer_examples() {
        let mbit = 1e6 / 8.0;
        assert_eq!(transfer_time(50.0 * mbit, 50.0, 0.0).unwrap(), 1.0);
        assert_eq!(link_transfer_time(Link::CoLocated, 1e9).unwrap(), 0.0);
        let t = transfer_time(400.0 * mbit, 400.0, 0.02).unwrap();
        assert!((t - 1.02).abs() < 1e-15);
        assert!(transfer_time(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn compute_examples() {
        assert_eq!(compute_time(1.0, 0.25, 1.0, false).unwrap(), 4.0);
        assert_eq!(compute_time(1.0, 0.25, 1.0, true).unwrap(), 1.0);
        assert_eq!(compute_time(2.0, 1.0, 3.0, false).unwrap(), 6.0);
        assert!(compute_time(1.0, 0.3, 1.0, false).is_err());
    }

    #[test]
    fn linear_chain_sums_everything() {
        let p = chain(3);
        let topo = TierTopology::three_tier_default();
        let t = Table {
            base: vec![0.1, 0.2, 0.3],
            size: vec![1e6, 2e5, 1e3],
        };
        let plan = PlanPoint::over_provisioned(vec![0; 3], vec![0, 1, 2]);
        let b = pipeline_latency(&plan, &p, &topo, &t).unwrap();
        let expect = 0.1 * 4.0
            + transfer_time(1e6, 50.0, 0.005).unwrap()
            + 0.2 * 1.6
            + transfer_time(2e5, 400.0, 0.005).unwrap()
            + 0.3;
        assert!((b.total - expect).abs() < 1e-12);
        assert_eq!(b.critical_path, vec![0, 1, 2]);
    }

    #[test]
    fn moving_cloudward_adds_exactly_l_over_b() {
        let p = chain(2);
        let topo = TierTopology::three_tier_default();
        // Equal speed on device and MEC isolates the transfer term.
        let mut tiers = topo.tiers().to_vec();
        tiers[1].speed_factor = tiers[0].speed_factor;
        let bw = (0..3)
            .map(|a| (0..3).map(|b| topo.bandwidth(a, b)).collect())
            .collect();
        let topo = TierTopology::new(tiers, bw, 0.005, 0.005, 2).unwrap();
        let t = Table {
            base: vec![0.1, 0.1],
            size: vec![6.25e6, 1.0],
        };
        let local = plan_latency(&PlanPoint::over_provisioned(vec![0, 0], vec![0, 0]), &p, &topo, &t).unwrap();
        let moved = plan_latency(&PlanPoint::over_provisioned(vec![0, 0], vec![0, 1]), &p, &topo, &t).unwrap();
        let l_over_b = 6.25e6 * 8.0 / 50e6 - 6.25e6 * 8.0 / 25_000e6;
        assert!((moved - local - l_over_b).abs() < 1e-12);
    }

    #[test]
    fn profiling_cost_examples() {
        assert_eq!(profiling_cost(&[0.5], 0, 0, 3.67), ProfilingCost::ZERO);
        assert_eq!(profiling_cost(&[0.2, 0.3], 2, 100, 3.67).gpu_seconds, 0.0);
        let c = profiling_cost(&[0.2, 0.3], 0, 100, 3.67);
        assert!((c.gpu_seconds - 50.0).abs() < 1e-12);
        assert!((c.dollars - 0.051).abs() < 5e-4);
    }
}
