//! Shared vocabulary: pipelines, plans, queries, SLOs and the tier topology.
//!
//! Every value here is immutable after construction and validated on the way
//! in (including when parsed from JSON), so sessions can share them freely.

mod pipeline;
mod plan;
mod query;
mod space;
mod topology;

pub use pipeline::{OperatorSpec, PipelineSpec};
pub use plan::{Fraction, PlanPoint};
pub use query::{Budget, ProfileOutcome, Query, Verdict};
pub use space::{
    binomial, enumerate_plan_space, monotone_placement_count, monotone_placements, PlanSpace,
};
pub use topology::{Link, Tier, TierTopology};
