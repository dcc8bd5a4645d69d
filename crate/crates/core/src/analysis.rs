//! Regret curves, fairness satisfaction, closed-form regret bounds and
//! cross-replication aggregation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Action, Eta};

/// Per-round record of one learner run against the coupled benchmark.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub actions: Vec<Action>,
    /// `sum_{i in A(t)} w_i X_i(t)` for the learner.
    pub learner_rewards: Vec<f64>,
    /// The benchmark's weighted reward on the same `X(t)`.
    pub benchmark_rewards: Vec<f64>,
    /// Final per-arm pull totals.
    pub pulls: Vec<u64>,
}

impl RunTrace {
    pub fn new(num_arms: usize) -> Self {
        RunTrace { pulls: vec![0; num_arms], ..Default::default() }
    }

    pub fn push(&mut self, action: Action, learner_reward: f64, benchmark_reward: f64) {
        for i in action.iter() {
            self.pulls[i] += 1;
        }
        self.actions.push(action);
        self.learner_rewards.push(learner_reward);
        self.benchmark_rewards.push(benchmark_reward);
    }

    pub fn len(&self) -> usize {
        self.learner_rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.learner_rewards.is_empty()
    }
}

/// Time-averaged regret after each round: entry `t` is
/// `(1/(t+1)) sum_{tau <= t} (benchmark - learner)`. Can go negative.
pub fn regret_curve(trace: &RunTrace) -> Vec<f64> {
    let mut total = 0.0;
    trace
        .benchmark_rewards
        .iter()
        .zip(&trace.learner_rewards)
        .enumerate()
        .map(|(t, (b, l))| {
            total += b - l;
            total / (t + 1) as f64
        })
        .collect()
}

/// Time-averaged weighted reward after each round.
pub fn reward_curve(rewards: &[f64]) -> Vec<f64> {
    let mut total = 0.0;
    rewards
        .iter()
        .enumerate()
        .map(|(t, r)| {
            total += r;
            total / (t + 1) as f64
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FairnessStatus {
    pub fraction: f64,
    pub target: f64,
    pub satisfied: bool,
}

pub const DEFAULT_FAIRNESS_TOLERANCE: f64 = 0.01;

/// Pull fraction of every arm against its target, with slack `tolerance`.
pub fn fairness_satisfaction(pulls: &[u64], horizon: usize, targets: &[f64], tolerance: f64) -> Vec<FairnessStatus> {
    pulls
        .iter()
        .zip(targets)
        .map(|(&p, &k)| {
            let fraction = if horizon == 0 { 0.0 } else { p as f64 / horizon as f64 };
            FairnessStatus { fraction, target: k, satisfied: fraction >= k - tolerance }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub horizon: f64,
    pub num_arms: usize,
    pub cardinality: usize,
    pub w_max: f64,
    pub eta: Eta,
}

impl BoundParams {
    pub fn new(horizon: f64, num_arms: usize, cardinality: usize, w_max: f64, eta: Eta) -> Result<Self> {
        if !(horizon > 1.0) {
            return Err(Error::InvalidArgument(format!("bound needs T > 1, got {horizon}")));
        }
        if cardinality == 0 || cardinality > num_arms {
            return Err(Error::InvalidArgument(format!("bound needs 0 < m <= N, got m={cardinality}, N={num_arms}")));
        }
        if !(w_max > 0.0) {
            return Err(Error::InvalidArgument(format!("bound needs w_max > 0, got {w_max}")));
        }
        Ok(BoundParams { horizon, num_arms, cardinality, w_max, eta })
    }

    fn queue_term(&self) -> f64 {
        self.num_arms as f64 * self.eta.inverse() / 2.0
    }

    fn mnt_log_t(&self) -> f64 {
        let t = self.horizon;
        self.cardinality as f64 * self.num_arms as f64 * t * t.ln()
    }
}

/// `N/(2 eta) + (4 w_max sqrt(m N T ln T) + 2.51 w_max N) / T`.
pub fn tscsf_bound(p: &BoundParams) -> f64 {
    let n = p.num_arms as f64;
    p.queue_term() + (4.0 * p.w_max * p.mnt_log_t().sqrt() + 2.51 * p.w_max * n) / p.horizon
}

/// `N/(2 eta) + (2 w_max sqrt(6 m N T ln T) + 5.11 w_max N) / T`.
pub fn lfg_bound(p: &BoundParams) -> f64 {
    let n = p.num_arms as f64;
    p.queue_term() + (2.0 * p.w_max * (6.0 * p.mnt_log_t()).sqrt() + 5.11 * p.w_max * n) / p.horizon
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub mean: Vec<f64>,
    /// Sample standard deviation (zero for a single run).
    pub sd: Vec<f64>,
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Pointwise mean and sample standard deviation of equal-length curves.
pub fn aggregate_runs(runs: &[Vec<f64>]) -> Result<Aggregate> {
    let first = runs.first().ok_or_else(|| Error::InvalidArgument("no runs to aggregate".into()))?;
    let len = first.len();
    if let Some(bad) = runs.iter().find(|r| r.len() != len) {
        return Err(Error::InvalidArgument(format!("ragged runs: lengths {len} and {}", bad.len())));
    }
    let n = runs.len() as f64;
    let mut column = vec![0.0; runs.len()];
    let mut mean = Vec::with_capacity(len);
    let mut sd = Vec::with_capacity(len);
    for t in 0..len {
        for (c, r) in column.iter_mut().zip(runs) {
            *c = r[t];
        }
        let mu = pairwise_sum(&column) / n;
        mean.push(mu);
        if runs.len() < 2 {
            sd.push(0.0);
        } else {
            for c in column.iter_mut() {
                *c = (*c - mu) * (*c - mu);
            }
            sd.push((pairwise_sum(&column) / (n - 1.0)).sqrt());
        }
    }
    Ok(Aggregate { mean, sd })
}
