//! Learn fuzzy cognitive maps from noisy time series.
//!
//! A fuzzy cognitive map evolves node states by squashing weighted sums of
//! the previous states. This crate generates synthetic maps and response
//! data, recovers the weight matrix from observations by per-node convex
//! optimization (least squares + L1 sparsity + an entropy bonus, minimized
//! by damped Newton steps over the `[-1, 1]` box), offers a particle swarm
//! baseline, and ships the metrics and experiment harness used to compare
//! them.

pub mod activation;
pub mod datagen;
pub mod error;
pub mod fcm;
pub mod harness;
pub mod io;
pub mod learner;
pub mod metrics;
pub mod pso;

pub use activation::{ActivationFamily, ActivationSpec};
pub use error::{Error, Result};
pub use fcm::{simulate, step, ResponseSet, StateVector, WeightMatrix};
pub use harness::{
    leave_one_out, random_search, run_experiment, EvalSettings, ExperimentConfig,
    ExperimentSummary, LooOutcome, MapSource, SearchOutcome, SearchSpace,
};
pub use learner::{learn, LearnConfig};
pub use metrics::{aggregate, AggregateReport, MetricsReport};
pub use pso::{pso_learn, PsoConfig};
