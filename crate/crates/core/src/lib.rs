//! SLO-aware planning for multi-operator ML pipelines.
//!
//! The crate profiles candidate plans with stratified sampling and
//! sequential tests, searches plan space with a cost-aware multi-objective
//! Bayesian optimizer, trims resources to the cost/latency frontier, packs
//! many queries onto a tiered cluster and replays it all in a
//! discrete-event simulator. Synthetic ground-truth landscapes stand in for
//! real models and data so every decision can be checked exhaustively.

pub mod catalog;
pub mod error;
pub mod io;
pub mod landscape;
pub mod latency;
pub mod model;
pub mod par;
pub mod profiler;
pub mod rng;
pub mod sched;
pub mod search;
pub mod sim;
pub mod workload;

pub use error::{PlanError, Result};
