//! Combinatorial sleeping multi-armed bandits with long-term fairness
//! constraints.
//!
//! The crate provides Thompson sampling with Beta priors and virtual
//! fairness queues, the UCB-based fairness baseline, the fairness-free and
//! queue-aware oracles, the LP-defined optimal randomized policy, regret and
//! fairness analysis, closed-form regret bounds, MovieLens ingestion and an
//! experiment harness.

pub mod analysis;
pub mod config;
pub mod env;
pub mod error;
pub mod experiment;
pub mod ingest;
pub mod lp;
pub mod model;
pub mod policy;
pub mod rng;

pub use error::{Error, Result};
