use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the planner, its oracles and the simulator.
#[derive(Debug, Error)]
pub enum PlanError {
    #[error("invalid pipeline: {0}")]
    InvalidPipeline(String),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("unknown stratum {stratum} (landscape has {count})")]
    UnknownStratum { stratum: usize, count: usize },
    #[error("stratification: {0}")]
    Stratification(String),
    #[error("stratum weights sum to {0}, expected 1")]
    WeightsNotNormalized(f64),
    #[error("bandwidth must be positive, got {0} Mbps")]
    NonPositiveBandwidth(f64),
    #[error("resource fraction {0} is not on the grid {{1, 1/2, 1/4, 1/8}}")]
    OffGridFraction(f64),
    #[error("plan space has {count} plans, above the exhaustive limit of {limit}")]
    SpaceTooLarge { count: u64, limit: u64 },
    #[error("instance too large for the exhaustive oracle: {0}")]
    InstanceTooLarge(String),
    #[error("plan violates the latency SLO even at full resources ({latency:.4}s > {slo:.4}s)")]
    InfeasibleAtFullResources { latency: f64, slo: f64 },
    #[error("schema version {found} unsupported (expected {expected}) in {path}")]
    SchemaVersion {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = PlanError> = std::result::Result<T, E>;
