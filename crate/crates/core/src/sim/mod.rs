//! Discrete-event simulation of query arrivals, planning, scheduling and
//! drift on simulated clocks, plus side-by-side runs of planner variants.

mod compare;
mod config;
mod engine;
mod report;

pub use compare::{ablations, compare, Comparison, ComparisonRow, Variant};
pub use config::{
    DriftChange, DriftEvent, Hardness, PlannerFlags, Scenario, SchedulerKind, SimConfig, Template, TemplateSpec,
    TraceSource,
};
pub use engine::{run, slo_from_front, SimOutput};
pub use report::{Distribution, GoodputPoint, MetricsReport, QueryRecord, QueryStatus, ReplanRecord};
