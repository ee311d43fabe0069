use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PlanError, Result};
use crate::io::{to_versioned_string, JsonlWriter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryStatus {
    /// Admitted and served until its lifespan ended.
    Completed,
    /// Lost its plan to drift and found no replacement.
    Degraded,
    /// Never admitted.
    Rejected,
    /// Still planning or waiting when the run ended.
    Pending,
}

impl QueryStatus {
    pub const ALL: [QueryStatus; 4] = [
        QueryStatus::Completed,
        QueryStatus::Degraded,
        QueryStatus::Rejected,
        QueryStatus::Pending,
    ];

    pub fn label(self) -> &'static str {
        match self {
            QueryStatus::Completed => "completed",
            QueryStatus::Degraded => "degraded",
            QueryStatus::Rejected => "rejected",
            QueryStatus::Pending => "pending",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub id: u64,
    pub template: usize,
    pub arrival_time: f64,
    pub a_slo: f64,
    pub l_slo: f64,
    pub weight: f64,
    pub status: QueryStatus,
    pub candidates: usize,
    /// Simulated planner seconds of the initial search.
    pub planning_seconds: f64,
    pub first_feasible_step: Option<usize>,
    /// Simulated seconds from arrival to the first compliant plan.
    pub response_time: Option<f64>,
    pub profiling_gpu_seconds: f64,
    pub admitted_at: Option<f64>,
    /// Whether the first admitted plan truly met both SLOs.
    pub admitted_plan_compliant: Option<bool>,
    /// Whether any plan truly met both SLOs at arrival.
    pub feasible_at_arrival: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplanRecord {
    pub query: u64,
    pub time: f64,
    /// `latency` or `accuracy`.
    pub trigger: String,
    pub planning_seconds: f64,
    pub first_feasible_time: Option<f64>,
    pub candidates: usize,
    /// Whether the search accepted a plan that truly meets both SLOs.
    pub found_compliant: bool,
    /// Simulated planner seconds when that plan was accepted.
    pub first_compliant_time: Option<f64>,
    /// Whether any compliant plan exists under the drifted ground truth.
    pub oracle_feasible: bool,
    pub degraded: bool,
}

/// State after one event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodputPoint {
    pub time: f64,
    pub admitted: usize,
    /// Admitted queries whose plan truly meets both SLOs.
    pub goodput: usize,
    pub pending: usize,
    pub hourly_cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub count: usize,
    pub median: Option<f64>,
    pub p90: Option<f64>,
    pub max: Option<f64>,
}

impl Distribution {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |q: f64| v.get(((v.len() as f64 - 1.0) * q).round() as usize).copied();
        Self {
            count: v.len(),
            median: at(0.5),
            p90: at(0.9),
            max: v.last().copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub queries: usize,
    pub status_counts: BTreeMap<String, usize>,
    /// Simulated seconds covered.
    pub horizon: f64,
    /// Integral of goodput over time, in query-seconds.
    pub goodput_integral: f64,
    pub mean_goodput: f64,
    pub peak_goodput: usize,
    pub deployment_dollars: f64,
    pub profiling_gpu_seconds: f64,
    pub profiling_dollars: f64,
    pub response_time: Distribution,
    pub per_query: Vec<QueryRecord>,
    pub replans: Vec<ReplanRecord>,
    pub series: Vec<GoodputPoint>,
}

impl MetricsReport {
    pub fn count(&self, status: QueryStatus) -> usize {
        self.status_counts.get(status.label()).copied().unwrap_or(0)
    }

    pub fn to_json(&self) -> Result<String> {
        to_versioned_string(self)
    }

    pub fn goodput_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for p in &self.series {
            w.serialize(p)?;
        }
        finish_csv(w)
    }

    /// Writes `report.json`, `goodput.csv` and `queries.jsonl` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|source| PlanError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let put = |name: &str, text: String| {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|source| PlanError::Io { path, source })
        };
        put("report.json", self.to_json()?)?;
        put("goodput.csv", self.goodput_csv()?)?;
        #[derive(Serialize)]
        struct Header {
            kind: &'static str,
        }
        let mut log = JsonlWriter::create(dir.join("queries.jsonl"), &Header { kind: "query_log" })?;
        for q in &self.per_query {
            log.write(q)?;
        }
        log.finish()
    }
}

pub(crate) fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distribution_quantiles() {
        let d = Distribution::of(&[5.0, 1.0, 3.0]);
        assert_eq!((d.count, d.median, d.max), (3, Some(3.0), Some(5.0)));
        assert_eq!(Distribution::of(&[]).median, None);
    }
}
