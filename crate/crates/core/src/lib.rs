//! Shallow, explainable k-means clusterings.
//!
//! Starting from a reference k-means solution, the crate grows an
//! axis-aligned threshold tree with exactly `k` leaves, one reference center
//! per leaf. The default strategy ([`Strategy::ExShallow`]) scores each
//! candidate cut by its local cost inflation plus `lambda` times an estimate
//! of its effect on the size-weighted depth of the final tree, which yields
//! trees that are both cheap and shallow. IMM, ExGreedy and an ExKMC-style
//! surrogate are available as baselines.
//!
//! Module map:
//! - [`tree`]: datasets, centers, cuts and the threshold tree itself
//! - [`kmeans`]: k-means++ seeding, Lloyd iterations, partition cost
//! - [`splitter`]: candidate cuts and their scores at one node
//! - [`builder`]: top-down construction under each strategy
//! - [`metrics`]: cost, WAD, WAES, explanations, NMI
//! - [`calibrate`]: search over `lambda` for cost / explanation-size goals
//! - [`io`]: CSV loading, JSON/DOT tree export
//! - [`experiment`]: seeded runs over strategies, result tables

pub mod builder;
pub mod calibrate;
mod error;
pub mod experiment;
pub mod io;
pub mod kmeans;
pub mod metrics;
pub mod splitter;
pub mod tree;

pub use builder::{build_tree, eval_dexp, eval_wad, KillerTracker, Strategy, TreeBuilder, DEFAULT_LAMBDA};
pub use calibrate::{calibrate_lambda, CalibrationGoal, CalibrationOutcome, CalibrationStatus};
pub use error::{Error, Result};
pub use kmeans::{kmeans_cost, kmeanspp_init, lloyd, LloydConfig, LloydResult};
pub use metrics::{nmi, synthetic_d1_d4, Explanation, MetricsReport, Reference};
pub use splitter::{CandidateScore, NodeView};
pub use tree::{partition_by_cut, Assignment, CenterSet, Condition, Cut, Dataset, Node, Side, Sketch, ThresholdTree};
