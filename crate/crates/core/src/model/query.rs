use serde::{Deserialize, Serialize};

use crate::error::{PlanError, Result};

/// Planning budget: wall-clock seconds for latency-critical queries, or
/// profiling GPU-hours for throughput-critical ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    ResponseSeconds(f64),
    ProfilingGpuHours(f64),
}

/// A user query: which pipeline, its SLOs and its lifetime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub id: u64,
    pub pipeline: String,
    /// Minimum accuracy.
    pub a_slo: f64,
    /// Maximum end-to-end latency in seconds.
    pub l_slo: f64,
    pub budget: Budget,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default)]
    pub arrival_time: f64,
    #[serde(default = "default_lifespan")]
    pub lifespan: f64,
}

fn one() -> f64 {
    1.0
}

fn default_lifespan() -> f64 {
    60.0
}

impl Query {
    pub fn new(id: u64, pipeline: &str, a_slo: f64, l_slo: f64, budget: Budget) -> Self {
        Self {
            id,
            pipeline: pipeline.to_string(),
            a_slo,
            l_slo,
            budget,
            weight: 1.0,
            arrival_time: 0.0,
            lifespan: default_lifespan(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PlanError::InvalidQuery(format!("query {}: {m}", self.id)));
        if !(self.a_slo > 0.0 && self.a_slo <= 1.0) {
            return bad("accuracy SLO must lie in (0, 1]");
        }
        if !(self.l_slo > 0.0 && self.l_slo.is_finite()) {
            return bad("latency SLO must be positive");
        }
        let b = match self.budget {
            Budget::ResponseSeconds(s) => s,
            Budget::ProfilingGpuHours(h) => h,
        };
        if !(b >= 0.0 && b.is_finite()) {
            return bad("budget must be non-negative");
        }
        if !(self.weight > 0.0) || !(self.lifespan > 0.0) || !(self.arrival_time >= 0.0) {
            return bad("weight and lifespan must be positive, arrival non-negative");
        }
        Ok(())
    }
}

/// Outcome of the accuracy test against the SLO.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    PassAccuracy,
    FailAccuracy,
    Inconclusive,
}

/// What profiling one plan produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileOutcome {
    pub accuracy_estimate: f64,
    pub samples_used: usize,
    pub verdict: Verdict,
    pub latency_estimate: f64,
    /// Charged compute, in GPU-seconds on the reference tier.
    pub profiling_cost: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_is_exactly_one_form() {
        let q = Query::new(1, "p", 0.8, 1.0, Budget::ResponseSeconds(5.0));
        let json = serde_json::to_string(&q).unwrap();
        assert!(json.contains("\"response_seconds\":5.0"));
        assert_eq!(serde_json::from_str::<Query>(&json).unwrap(), q);
        let both = json.replace(
            "{\"response_seconds\":5.0}",
            "{\"response_seconds\":5.0,\"profiling_gpu_hours\":1.0}",
        );
        assert!(serde_json::from_str::<Query>(&both).is_err());
    }

    #[test]
    fn validation() {
        let mut q = Query::new(1, "p", 0.8, 1.0, Budget::ResponseSeconds(5.0));
        assert!(q.validate().is_ok());
        q.a_slo = 0.0;
        assert!(q.validate().is_err());
        q.a_slo = 1.0;
        q.l_slo = 0.0;
        assert!(q.validate().is_err());
    }
}
