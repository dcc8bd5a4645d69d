//! Experiment orchestration: replications, the eta sweep, aggregation and
//! CSV output.
//!
//! Within one replication every policy sees the same round sequence; the
//! Opt-F benchmark runs alongside and its realized reward on the same
//! rewards is the reference for regret. Replications run in parallel and
//! are reduced in replication order, so results do not depend on thread
//! scheduling.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{
    aggregate_runs, lfg_bound, regret_curve, reward_curve, tscsf_bound, Aggregate,
    BoundParams, FairnessStatus, RunTrace,
};
use crate::config::ExperimentConfig;
use crate::env::{bernoullize, Environment, ReplayTrace};
use crate::error::{Error, Result};
use crate::lp::{optimal_fair_policy, RandomizedPolicy};
use crate::model::{Action, ArmSet, Eta, ProblemInstance};
use crate::policy::{Agent, PolicyKind, PolicyState};
use crate::rng::{self, SimRng};

/// Binary observation of a reward. Values already in {0,1} pass through
/// without touching the stream; anything else is Bernoulli-ized.
fn observe(raw: f64, rng: &mut SimRng) -> Result<u8> {
    if raw == 0.0 {
        Ok(0)
    } else if raw == 1.0 {
        Ok(1)
    } else {
        bernoullize(raw, rng)
    }
}

fn check_legal(kind: PolicyKind, action: Action, available: ArmSet, m: usize, t: usize) -> Result<()> {
    if !action.is_subset(available) || action.len() > m {
        return Err(Error::InvalidArgument(format!(
            "{kind} chose {action} from {available} with m={m} in round {t}"
        )));
    }
    Ok(())
}

/// Final state of one policy after one replication.
#[derive(Debug, Clone)]
pub struct PolicyRun {
    pub kind: PolicyKind,
    pub trace: RunTrace,
    pub state: PolicyState,
}

impl PolicyRun {
    /// Per-arm reward estimate: posterior mean for Thompson sampling, the
    /// optimistic index for LFG, the plain empirical mean otherwise.
    pub fn estimates(&self) -> Vec<f64> {
        let n = self.state.posteriors.len();
        (0..n)
            .map(|i| match self.kind {
                PolicyKind::TscsfB => self.state.posteriors[i].posterior_mean(),
                PolicyKind::Lfg => self.state.ucb_index(i),
                _ => {
                    let s = self.state.ucb_stats[i];
                    if s.pulls == 0 {
                        f64::NAN
                    } else {
                        s.reward_sum / s.pulls as f64
                    }
                }
            })
            .collect()
    }
}

/// Drives `kinds` for `instance.horizon` rounds (or the whole trace) with
/// streams derived from `replication_seed`.
pub fn run_replication(
    instance: &ProblemInstance,
    benchmark: &RandomizedPolicy,
    kinds: &[PolicyKind],
    replication_seed: u64,
    trace: Option<&ReplayTrace>,
) -> Result<Vec<PolicyRun>> {
    let n = instance.num_arms();
    let m = instance.cardinality;
    let (mut env, horizon) = match trace {
        Some(trace) => (Environment::Replay { trace, cursor: 0 }, trace.len()),
        None => (
            Environment::Synthetic { instance, rng: rng::stream(replication_seed, rng::ENV_STREAM) },
            instance.horizon,
        ),
    };
    let make = |kind: PolicyKind| Agent::new(kind, n, rng::stream(replication_seed, kind.stream_id()), Some(benchmark));
    let mut reference = make(PolicyKind::OptF)?;
    let mut agents: Vec<(Agent, RunTrace)> =
        kinds.iter().map(|&k| Ok((make(k)?, RunTrace::new(n)))).collect::<Result<_>>()?;

    let mut observed = Vec::with_capacity(m);
    for t in 0..horizon {
        let round = env.next_round().ok_or(Error::OutOfRange { index: t, len: t })?;
        let z = round.availability;

        let bench_action = reference.decide(instance, z)?;
        check_legal(PolicyKind::OptF, bench_action, z, m, t)?;
        let bench_reward = instance.weighted_reward(bench_action, &round.rewards);
        observed.clear();
        for i in bench_action.iter() {
            observed.push((i, observe(round.rewards[i], reference.rng_mut())?));
        }
        reference.feedback(bench_action, &observed)?;

        for (agent, run) in agents.iter_mut() {
            let action = agent.decide(instance, z)?;
            check_legal(agent.kind(), action, z, m, t)?;
            observed.clear();
            for i in action.iter() {
                observed.push((i, observe(round.rewards[i], agent.rng_mut())?));
            }
            agent.feedback(action, &observed)?;
            run.push(action, instance.weighted_reward(action, &round.rewards), bench_reward);
        }
    }
    Ok(agents.into_iter().map(|(a, trace)| PolicyRun { kind: a.kind(), state: a.state, trace }).collect())
}

#[derive(Debug, Clone)]
pub struct PolicySummary {
    pub kind: PolicyKind,
    pub regret: Aggregate,
    /// Time-averaged weighted reward.
    pub reward: Aggregate,
    /// Fairness status of the replication-mean pull fractions.
    pub fairness: Vec<FairnessStatus>,
    /// Replication-mean per-arm estimates (see [`PolicyRun::estimates`]).
    pub estimates: Vec<f64>,
    /// Final-round regret of every replication.
    pub final_regrets: Vec<f64>,
}

impl PolicySummary {
    pub fn final_regret(&self) -> f64 {
        *self.regret.mean.last().unwrap_or(&0.0)
    }

    pub fn final_reward(&self) -> f64 {
        *self.reward.mean.last().unwrap_or(&0.0)
    }
}

#[derive(Debug, Clone)]
pub struct EtaReport {
    pub eta: Eta,
    pub policies: Vec<PolicySummary>,
    /// Time-averaged reward of the Opt-F reference.
    pub benchmark_reward: Aggregate,
}

impl EtaReport {
    pub fn policy(&self, kind: PolicyKind) -> Option<&PolicySummary> {
        self.policies.iter().find(|p| p.kind == kind)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config_hash: String,
    pub master_seed: u64,
    pub replication_seeds: Vec<u64>,
    /// Resolved instance; `eta` is a placeholder, see [`EtaReport::eta`].
    pub instance: ProblemInstance,
    pub benchmark: RandomizedPolicy,
    /// Expected per-round reward of the LP benchmark.
    pub benchmark_value: f64,
    /// Ground-truth means used by benchmarks (trace estimates in replay mode).
    pub true_means: Vec<f64>,
    pub etas: Vec<EtaReport>,
    pub replay: bool,
}

impl ExperimentReport {
    pub fn eta(&self, eta: Eta) -> Option<&EtaReport> {
        self.etas.iter().find(|e| e.eta == eta)
    }
}

fn summarize(kind: PolicyKind, runs: &[&PolicyRun], instance: &ProblemInstance, tolerance: f64) -> Result<PolicySummary> {
    let regrets: Vec<Vec<f64>> = runs.iter().map(|r| regret_curve(&r.trace)).collect();
    let rewards: Vec<Vec<f64>> = runs.iter().map(|r| reward_curve(&r.trace.learner_rewards)).collect();
    let final_regrets = regrets.iter().map(|c| *c.last().unwrap_or(&0.0)).collect();
    let regret = aggregate_runs(&regrets)?;
    let reward = aggregate_runs(&rewards)?;

    let n = instance.num_arms();
    let reps = runs.len() as f64;
    let horizon = runs[0].trace.len();
    let mut mean_fraction = vec![0.0; n];
    let mut estimates = vec![0.0; n];
    for run in runs {
        for i in 0..n {
            mean_fraction[i] += run.trace.pulls[i] as f64 / horizon.max(1) as f64 / reps;
        }
        for (e, v) in estimates.iter_mut().zip(run.estimates()) {
            *e += v / reps;
        }
    }
    let fairness = mean_fraction
        .iter()
        .zip(instance.fairness_targets())
        .map(|(&f, k)| FairnessStatus { fraction: f, target: k, satisfied: f >= k - tolerance })
        .collect();
    Ok(PolicySummary { kind, regret, reward, fairness, estimates, final_regrets })
}

/// Loads the trace (replay mode) and resolves the instance.
pub fn resolve_instance(cfg: &ExperimentConfig) -> Result<(ProblemInstance, Option<ReplayTrace>)> {
    match &cfg.experiment.trace {
        Some(path) => {
            let trace = ReplayTrace::load(path)?;
            if trace.num_arms() != cfg.num_arms() {
                return Err(Error::Config(format!(
                    "trace has {} arms, config has {}",
                    trace.num_arms(),
                    cfg.num_arms()
                )));
            }
            if trace.is_empty() {
                return Err(Error::Config("trace has no rounds".into()));
            }
            let means = trace.empirical_means();
            let avail = trace.empirical_availability();
            let inst = cfg.instance_with(Some(&means), Some(&avail), Some(trace.len()))?;
            Ok((inst, Some(trace)))
        }
        None => Ok((cfg.instance()?, None)),
    }
}

/// Runs the whole sweep in memory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (instance, trace) = resolve_instance(cfg)?;
    run_experiment_on(cfg, &instance, trace.as_ref())
}

pub fn run_experiment_on(
    cfg: &ExperimentConfig,
    instance: &ProblemInstance,
    trace: Option<&ReplayTrace>,
) -> Result<ExperimentReport> {
    let exp = &cfg.experiment;
    let horizon = trace.map_or(instance.horizon, ReplayTrace::len);
    // The LP does not involve eta: solve once.
    let (_, benchmark) = optimal_fair_policy(instance)?;
    let seeds: Vec<u64> = (0..exp.replications as u64).map(|r| rng::split_seed(exp.seed, r)).collect();

    let mut etas = Vec::new();
    for eta in cfg.etas(horizon)? {
        let inst = instance.with_eta(eta);
        let reps: Vec<Vec<PolicyRun>> = seeds
            .par_iter()
            .map(|&seed| run_replication(&inst, &benchmark, &exp.policies, seed, trace))
            .collect::<Result<_>>()?;

        let bench_curves: Vec<Vec<f64>> =
            reps.iter().map(|runs| reward_curve(&runs[0].trace.benchmark_rewards)).collect();
        let mut policies = Vec::new();
        for (p, &kind) in exp.policies.iter().enumerate() {
            let runs: Vec<&PolicyRun> = reps.iter().map(|r| &r[p]).collect();
            policies.push(summarize(kind, &runs, &inst, exp.fairness_tolerance)?);
        }
        etas.push(EtaReport { eta, policies, benchmark_reward: aggregate_runs(&bench_curves)? });
    }

    Ok(ExperimentReport {
        config_hash: cfg.hash(),
        master_seed: exp.seed,
        replication_seeds: seeds,
        instance: instance.clone(),
        benchmark_value: benchmark.optimal_value,
        benchmark,
        true_means: instance.arms.iter().map(|a| a.mean_reward).collect(),
        etas,
        replay: trace.is_some(),
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn regret_csv(report: &EtaReport) -> String {
    let mut out = String::from("round,policy,mean,sd\n");
    for p in &report.policies {
        for (t, (m, s)) in p.regret.mean.iter().zip(&p.regret.sd).enumerate() {
            let _ = writeln!(out, "{},{},{},{}", t + 1, p.kind, m, s);
        }
    }
    out
}

pub fn fairness_csv(summary: &PolicySummary) -> String {
    let mut out = String::from("arm,fraction,target,satisfied\n");
    for (i, f) in summary.fairness.iter().enumerate() {
        let _ = writeln!(out, "{},{},{},{}", i + 1, f.fraction, f.target, f.satisfied);
    }
    out
}

pub fn estimates_csv(report: &ExperimentReport, eta: &EtaReport) -> String {
    let mut out = String::from("arm,policy,estimate,true_mean\n");
    for p in &eta.policies {
        for (i, e) in p.estimates.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", i + 1, p.kind, e, report.true_means[i]);
        }
    }
    out
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    config_hash: &'a str,
    master_seed: u64,
    replication_seeds: &'a [u64],
    mode: &'a str,
    benchmark_value: f64,
    files: Vec<String>,
    created_unix: u64,
}

/// Writes one regret CSV per eta, one fairness and estimate CSV per
/// (eta, policy), and `manifest.json`. Returns the written paths.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for eta in &report.etas {
        let label = eta.eta.label();
        let path = dir.join(format!("regret_eta_{label}.csv"));
        write_file(&path, &regret_csv(eta))?;
        files.push(path);
        for p in &eta.policies {
            let path = dir.join(format!("fairness_eta_{label}_{}.csv", p.kind));
            write_file(&path, &fairness_csv(p))?;
            files.push(path);
        }
        let path = dir.join(format!("estimates_eta_{label}.csv"));
        write_file(&path, &estimates_csv(report, eta))?;
        files.push(path);
    }
    let created_unix =
        std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config_hash: &report.config_hash,
        master_seed: report.master_seed,
        replication_seeds: &report.replication_seeds,
        mode: if report.replay { "replay" } else { "synthetic" },
        benchmark_value: report.benchmark_value,
        files: files.iter().filter_map(|p| p.file_name()).map(|f| f.to_string_lossy().into_owned()).collect(),
        created_unix,
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    write_file(&path, &(json + "\n"))?;
    files.push(path);
    Ok(files)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub horizon: u64,
    pub tscsf: f64,
    pub lfg: f64,
    pub empirical: Option<f64>,
}

/// `points` log-spaced integer horizons between `tmin` and `tmax`.
pub fn horizon_grid(tmin: u64, tmax: u64, points: usize) -> Result<Vec<u64>> {
    if tmin < 2 || tmax < tmin || points == 0 {
        return Err(Error::Config(format!("bad grid: tmin={tmin} tmax={tmax} points={points}")));
    }
    if points == 1 || tmin == tmax {
        return Ok(vec![tmin]);
    }
    let (lo, hi) = ((tmin as f64).ln(), (tmax as f64).ln());
    let mut grid: Vec<u64> = (0..points)
        .map(|k| (lo + (hi - lo) * k as f64 / (points - 1) as f64).exp().round() as u64)
        .map(|t| t.clamp(tmin, tmax))
        .collect();
    grid.dedup();
    Ok(grid)
}

/// Bound curves over a horizon grid. The first configured eta is used;
/// `"auto"` is re-resolved at every horizon. `empirical` is a time-averaged
/// regret curve whose entry `T-1` is reported for horizon `T`.
pub fn run_bounds(cfg: &ExperimentConfig, grid: &[u64], empirical: Option<&[f64]>) -> Result<Vec<BoundRow>> {
    let n = cfg.num_arms();
    let m = cfg.instance.cardinality;
    let w_max = cfg.instance.weights.as_ref().map_or(1.0, |w| w.iter().copied().fold(0.0, f64::max));
    let spec = cfg.experiment.eta[0];
    grid.iter()
        .map(|&t| {
            let eta = spec.resolve(n, m, t as usize)?;
            let p = BoundParams::new(t as f64, n, m, w_max, eta)?;
            let empirical = empirical.and_then(|c| c.get(t as usize - 1).copied());
            Ok(BoundRow { horizon: t, tscsf: tscsf_bound(&p), lfg: lfg_bound(&p), empirical })
        })
        .collect()
}

pub fn bounds_csv(rows: &[BoundRow]) -> String {
    let mut out = String::from("T,tscsf_bound,lfg_bound,empirical_regret\n");
    for r in rows {
        let emp = r.empirical.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", r.horizon, r.tscsf, r.lfg, emp);
    }
    out
}

/// Reads one policy's mean curve back from a regret CSV.
pub fn read_regret_curve(path: &Path, policy: PolicyKind) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
    let mut curve = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(err(idx + 1, "expected round,policy,mean,sd".into()));
        }
        if fields[1] == policy.name() {
            let v: f64 = fields[2].parse().map_err(|_| err(idx + 1, format!("bad mean {:?}", fields[2])))?;
            curve.push(v);
        }
    }
    Ok(curve)
}
