use serde::{Deserialize, Serialize};

use crate::error::{PlanError, Result};

/// One infrastructure layer (device, edge/MEC, cloud, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tier {
    pub name: String,
    pub machine_count: u32,
    /// Per-machine capacity in abstract resource units.
    pub capacity: f64,
    /// Dollars per resource-unit hour.
    pub unit_cost: f64,
    /// Multiplier on reference-tier compute time.
    pub speed_factor: f64,
}

impl Tier {
    /// Dollars per hour for one whole machine.
    pub fn machine_cost(&self) -> f64 {
        self.capacity * self.unit_cost
    }
}

/// How data moves between two placed operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Link {
    /// Same machine: the hand-off is free.
    CoLocated,
    Network { bandwidth_mbps: f64, fixed_latency: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TopologyRaw {
    tiers: Vec<Tier>,
    bandwidth_mbps: Vec<Vec<f64>>,
    #[serde(default = "default_wan")]
    wan_latency: f64,
    #[serde(default = "default_lan")]
    lan_latency: f64,
    #[serde(default)]
    reference_tier: Option<usize>,
}

fn default_wan() -> f64 {
    0.005
}

fn default_lan() -> f64 {
    0.001
}

/// Ordered tiers from the device side to the cloud, plus the network between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TopologyRaw", into = "TopologyRaw")]
pub struct TierTopology {
    tiers: Vec<Tier>,
    bandwidth_mbps: Vec<Vec<f64>>,
    wan_latency: f64,
    lan_latency: f64,
    reference_tier: usize,
}

impl TryFrom<TopologyRaw> for TierTopology {
    type Error = PlanError;

    fn try_from(raw: TopologyRaw) -> Result<Self> {
        let reference = raw
            .reference_tier
            .unwrap_or_else(|| raw.tiers.len().saturating_sub(1));
        TierTopology::new(raw.tiers, raw.bandwidth_mbps, raw.wan_latency, raw.lan_latency, reference)
    }
}

impl From<TierTopology> for TopologyRaw {
    fn from(t: TierTopology) -> Self {
        TopologyRaw {
            tiers: t.tiers,
            bandwidth_mbps: t.bandwidth_mbps,
            wan_latency: t.wan_latency,
            lan_latency: t.lan_latency,
            reference_tier: Some(t.reference_tier),
        }
    }
}

impl TierTopology {
    pub fn new(
        tiers: Vec<Tier>,
        bandwidth_mbps: Vec<Vec<f64>>,
        wan_latency: f64,
        lan_latency: f64,
        reference_tier: usize,
    ) -> Result<Self> {
        let bad = |m: String| Err(PlanError::InvalidTopology(m));
        let n = tiers.len();
        if n == 0 {
            return bad("no tiers".into());
        }
        for t in &tiers {
            let positive = |x: f64| x > 0.0 && x.is_finite();
            if t.machine_count == 0
                || !positive(t.capacity)
                || !positive(t.unit_cost)
                || !positive(t.speed_factor)
            {
                return bad(format!(
                    "tier {:?} needs positive machine count, capacity, cost and speed",
                    t.name
                ));
            }
        }
        if bandwidth_mbps.len() != n || bandwidth_mbps.iter().any(|row| row.len() != n) {
            return bad(format!("bandwidth matrix must be {n}x{n}"));
        }
        for a in 0..n {
            for b in 0..n {
                let bw = bandwidth_mbps[a][b];
                if !(bw > 0.0 && bw.is_finite()) {
                    return bad(format!("bandwidth[{a}][{b}] = {bw} is not positive"));
                }
                if bw != bandwidth_mbps[b][a] {
                    return bad(format!("bandwidth matrix not symmetric at ({a},{b})"));
                }
            }
        }
        if !(wan_latency >= 0.0 && lan_latency >= 0.0) {
            return bad("fixed link latencies must be non-negative".into());
        }
        if reference_tier >= n {
            return bad(format!("reference tier {reference_tier} out of range"));
        }
        Ok(Self {
            tiers,
            bandwidth_mbps,
            wan_latency,
            lan_latency,
            reference_tier,
        })
    }

    /// Small three-tier cluster: user devices on WiFi, a V100-class MEC
    /// cluster, and an A100-class cloud behind a WAN link.
    pub fn three_tier_default() -> Self {
        let tiers = vec![
            Tier {
                name: "device".into(),
                machine_count: 8,
                capacity: 1.0,
                unit_cost: 0.05,
                speed_factor: 4.0,
            },
            Tier {
                name: "mec".into(),
                machine_count: 4,
                capacity: 1.0,
                unit_cost: 2.48,
                speed_factor: 1.6,
            },
            Tier {
                name: "cloud".into(),
                machine_count: 4,
                capacity: 1.0,
                unit_cost: 3.67,
                speed_factor: 1.0,
            },
        ];
        let bw = vec![
            vec![25_000.0, 50.0, 50.0],
            vec![50.0, 3_000.0, 400.0],
            vec![50.0, 400.0, 3_000.0],
        ];
        Self::new(tiers, bw, 0.005, 0.001, 2).expect("default topology is valid")
    }

    pub fn tiers(&self) -> &[Tier] {
        &self.tiers
    }

    pub fn tier(&self, i: usize) -> &Tier {
        &self.tiers[i]
    }

    pub fn len(&self) -> usize {
        self.tiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiers.is_empty()
    }

    pub fn reference_tier(&self) -> usize {
        self.reference_tier
    }

    pub fn bandwidth(&self, a: usize, b: usize) -> f64 {
        self.bandwidth_mbps[a][b]
    }

    pub fn wan_latency(&self) -> f64 {
        self.wan_latency
    }

    pub fn lan_latency(&self) -> f64 {
        self.lan_latency
    }

    /// Link between operators placed on tiers `a` and `b`. Operators on the
    /// same tier talk over the intra-tier network; only an explicit
    /// same-machine hand-off is [`Link::CoLocated`].
    pub fn link(&self, a: usize, b: usize) -> Link {
        Link::Network {
            bandwidth_mbps: self.bandwidth_mbps[a][b],
            fixed_latency: if a == b { self.lan_latency } else { self.wan_latency },
        }
    }

    /// Copy with the bandwidth of the `a`–`b` link replaced (both directions).
    pub fn with_bandwidth(&self, a: usize, b: usize, mbps: f64) -> Result<Self> {
        let mut bw = self.bandwidth_mbps.clone();
        bw[a][b] = mbps;
        bw[b][a] = mbps;
        Self::new(
            self.tiers.clone(),
            bw,
            self.wan_latency,
            self.lan_latency,
            self.reference_tier,
        )
    }

    /// Total machines over all tiers.
    pub fn machine_total(&self) -> u32 {
        self.tiers.iter().map(|t| t.machine_count).sum()
    }
}
