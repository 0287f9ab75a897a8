//! Detection of anomalous, well-connected clusters in noisy graph signals.
//!
//! The crate provides the graph scan statistic (exact, by enumeration), its
//! convex relaxation through the Lovász extension of the cut functional
//! (evaluated by min-cut), effective-resistance machinery for test
//! thresholds, graph and signal generators, and a Monte Carlo harness.

pub mod cutflow;
pub mod electrical;
pub mod error;
pub mod graph;
pub mod harness;
pub mod models;
pub mod numfmt;
pub mod scan;

pub use cutflow::{g_dual, max_flow, mrf_map, CutSolution, DualValue, FlowNetwork, MaxFlow};
pub use electrical::{
    boundary_resistance, effective_resistance, gss_threshold, less_threshold, r_class_bound,
    r_class_exact, resistance_table, wilson_ust, ResistanceTable, ThresholdReport,
};
pub use error::{Error, Result};
pub use graph::{lovasz_extension_generic, Arc, Cluster, DirectedGraph, SignedIncidenceImage};
pub use scan::{
    detect, gss_bruteforce, less, max_test, minimize_dual, sum_test, DetectionResult, DualPoint,
    GssOptions, LessOptions, Method, TraceRow,
};
