//! Time-triggered traffic planning for time-sensitive networks.
//!
//! Streams are placed by building a size-bounded conflict graph over their
//! (route, phase) configurations and picking one non-conflicting
//! configuration per stream with a greedy independent-colorful-set heuristic.
//! The [`planner::Planner`] repeats this across dynamic update iterations;
//! [`harness`] wraps it in generators, config files and a CLI.

pub mod error;
pub mod expansion;
pub mod graph;
pub mod harness;
pub mod model;
pub mod plan;
pub mod planner;
pub mod routing;
pub mod solver;
pub mod timing;

pub use error::{Error, Result};
pub use expansion::{ExpansionParams, Scheme, Strategy};
pub use graph::{Configuration, ConflictGraph, VertexId};
pub use model::{Link, Network, Node, NodeId, NodeKind, Stream, StreamBatch, StreamId};
pub use plan::{validate_plan, TrafficPlan};
pub use planner::{IterationMetrics, Planner};
