//! Seeded rocks-pebbles-sand district growth on a generalized-county graph,
//! plan scoring, and ensemble analysis.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensemble;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod rps;

pub use ensemble::{canonical_key, parse_key, run_ensemble, EnsembleConfig, EnsembleResult};
pub use error::{Error, Result};
pub use ingest::{load_dataset, DataPaths, Dataset};
pub use metrics::{evaluate, PlanMetrics};
pub use model::{AdjacencyGraph, CountyId, District, GeneralizedCounty, Plan};
pub use rps::{grow_plan, run_once, GrowthOutcome, GrowthStatus};
