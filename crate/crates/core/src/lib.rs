//! Quality-Diversity optimization as a genetic algorithm whose selection runs
//! on a *competition fitness*: a transformation of raw fitness that depends on
//! where solutions sit in descriptor space.
//!
//! Competition functions provided:
//!
//! * [`competition::dns_competition`], Dominated Novelty Search: mean distance
//!   to the `k` nearest fitter solutions, `+inf` for undominated ones;
//! * [`competition::me_competition`], MAP-Elites grid competition;
//! * [`competition::te_competition`], distance-threshold unstructured archive;
//! * [`competition::cluster_elites_competition`], data-driven centroids.
//!
//! [`experiment::run_experiment`] drives the full loop on the benchmark tasks
//! in [`tasks`] and logs projected QD metrics from [`metrics`]. [`stats`] holds
//! the Mann-Whitney U / Holm-Bonferroni comparison used across runs.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod competition;
pub mod config;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod population;
pub mod stats;
pub mod tasks;

pub use error::{QdError, Result};
pub use matrix::Matrix;
