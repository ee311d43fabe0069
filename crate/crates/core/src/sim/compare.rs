use serde::{Deserialize, Serialize};

use super::config::{PlannerFlags, SchedulerKind, SimConfig};
use super::engine::run;
use super::report::{finish_csv, MetricsReport, QueryStatus};
use crate::error::{PlanError, Result};
use crate::par::Execution;

/// A named planner variant of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub config: SimConfig,
}

/// The full planner plus the standard single-component ablations.
pub fn ablations(base: &SimConfig) -> Vec<Variant> {
    let with = |name: &str, edit: fn(&mut PlannerFlags)| {
        let mut config = base.clone();
        edit(&mut config.planner);
        Variant {
            name: name.to_string(),
            config,
        }
    };
    vec![
        with("full", |_| {}),
        with("no-guided-sampling", |f| f.guided_sampling = false),
        with("fixed-n", |f| f.fixed_n = true),
        with("no-warm-start", |f| f.warm_start = false),
        with("fcfs", |f| f.scheduler = SchedulerKind::Fcfs),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub variant: String,
    pub mean_goodput: f64,
    pub completed: usize,
    pub degraded: usize,
    pub rejected: usize,
    pub profiling_gpu_seconds: f64,
    pub deployment_dollars: f64,
    pub median_response_time: Option<f64>,
    /// First variant's mean goodput over this one's.
    pub goodput_factor: f64,
    /// This variant's profiling GPU-seconds over the first one's.
    pub profiling_factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub reports: Vec<MetricsReport>,
}

impl Comparison {
    pub fn row(&self, variant: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        finish_csv(w)
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == den {
        1.0
    } else {
        num / den
    }
}

fn scenario_key(config: &SimConfig) -> SimConfig {
    let mut c = config.clone();
    c.planner = PlannerFlags::default();
    c.output_dir = None;
    c
}

/// Runs every variant on the same scenario; the first is the baseline the
/// factors are relative to. Variants may differ only in planner flags.
pub fn compare(variants: &[Variant], exec: Execution) -> Result<Comparison> {
    let Some(first) = variants.first() else {
        return Err(PlanError::Config("compare needs at least one variant".into()));
    };
    let base_key = scenario_key(&first.config);
    let scenarios = variants
        .iter()
        .map(|v| v.config.scenario())
        .collect::<Result<Vec<_>>>()?;
    for (v, s) in variants.iter().zip(&scenarios).skip(1) {
        if scenario_key(&v.config) != base_key
            || s.trace != scenarios[0].trace
            || s.templates != scenarios[0].templates
            || s.topology != scenarios[0].topology
        {
            return Err(PlanError::Config(format!(
                "variant `{}` differs from `{}` beyond planner flags",
                v.name, first.name
            )));
        }
    }
    let outputs = exec.map_slice(&scenarios, run);
    let reports = outputs
        .into_iter()
        .map(|o| o.map(|o| o.report))
        .collect::<Result<Vec<_>>>()?;
    let base = &reports[0];
    let rows = variants
        .iter()
        .zip(&reports)
        .map(|(v, r)| ComparisonRow {
            variant: v.name.clone(),
            mean_goodput: r.mean_goodput,
            completed: r.count(QueryStatus::Completed),
            degraded: r.count(QueryStatus::Degraded),
            rejected: r.count(QueryStatus::Rejected),
            profiling_gpu_seconds: r.profiling_gpu_seconds,
            deployment_dollars: r.deployment_dollars,
            median_response_time: r.response_time.median,
            goodput_factor: ratio(base.mean_goodput, r.mean_goodput),
            profiling_factor: ratio(r.profiling_gpu_seconds, base.profiling_gpu_seconds),
        })
        .collect();
    Ok(Comparison { rows, reports })
}
