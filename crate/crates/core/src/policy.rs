//! Decision rules.
//!
//! Learners (`TscsfB`, `Lfg`) see only availability sets and the rewards of
//! arms they pull. Benchmarks (`OptNf`, `Oracle`, `OptF`) additionally read
//! the true means from the instance or the solved LP.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::RandomizedPolicy;
use crate::model::{select_topm, Action, ArmSet, BetaPosterior, Eta, ProblemInstance, QueueState};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "tscsf-b")]
    TscsfB,
    #[serde(rename = "lfg")]
    Lfg,
    #[serde(rename = "opt-nf")]
    OptNf,
    #[serde(rename = "oracle")]
    Oracle,
    #[serde(rename = "opt-f")]
    OptF,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] =
        [PolicyKind::TscsfB, PolicyKind::Lfg, PolicyKind::OptNf, PolicyKind::Oracle, PolicyKind::OptF];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::TscsfB => "tscsf-b",
            PolicyKind::Lfg => "lfg",
            PolicyKind::OptNf => "opt-nf",
            PolicyKind::Oracle => "oracle",
            PolicyKind::OptF => "opt-f",
        }
    }

    /// Random stream owned by this policy within a replication. Stream 0
    /// belongs to the environment.
    pub fn stream_id(self) -> u64 {
        match self {
            PolicyKind::TscsfB => 1,
            PolicyKind::Lfg => 2,
            PolicyKind::OptNf => 3,
            PolicyKind::Oracle => 4,
            PolicyKind::OptF => 5,
        }
    }

    pub fn is_learner(self) -> bool {
        matches!(self, PolicyKind::TscsfB | PolicyKind::Lfg)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown policy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UcbStat {
    pub pulls: u64,
    pub reward_sum: f64,
}

/// Per-policy learning state.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    pub kind: PolicyKind,
    pub posteriors: Vec<BetaPosterior>,
    pub queues: QueueState,
    pub ucb_stats: Vec<UcbStat>,
}

impl PolicyState {
    pub fn new(kind: PolicyKind, num_arms: usize) -> Self {
        PolicyState {
            kind,
            posteriors: vec![BetaPosterior::uniform(); num_arms],
            queues: QueueState::new(num_arms),
            ucb_stats: vec![UcbStat::default(); num_arms],
        }
    }

    pub fn queue_values(&self, instance: &ProblemInstance) -> Vec<f64> {
        instance
            .arms
            .iter()
            .enumerate()
            .map(|(i, a)| self.queues.value(i, a.fairness_target))
            .collect()
    }

    /// LFG's optimistic index for `arm` at the current round.
    pub fn ucb_index(&self, arm: usize) -> f64 {
        let stat = self.ucb_stats[arm];
        if stat.pulls == 0 {
            return 1.0;
        }
        let t = self.queues.round().max(1) as f64;
        let mean = stat.reward_sum / stat.pulls as f64;
        (mean + (3.0 * t.ln() / (2.0 * stat.pulls as f64)).sqrt()).min(1.0)
    }
}

fn queue_weight(eta: Eta) -> f64 {
    eta.inverse()
}

/// Thompson sampling step: draws `theta_i ~ Beta(alpha_i, beta_i)` for each
/// available arm (ascending index order) and picks the top `m` by
/// `Q_i / eta + w_i theta_i`.
pub fn tscsf_b_step(state: &PolicyState, instance: &ProblemInstance, available: ArmSet, rng: &mut SimRng) -> Action {
    let inv_eta = queue_weight(instance.eta);
    let mut scores = vec![0.0; instance.num_arms()];
    for i in available.iter() {
        let arm = &instance.arms[i];
        let theta = state.posteriors[i].sample(rng);
        scores[i] = inv_eta * state.queues.value(i, arm.fairness_target) + arm.weight * theta;
    }
    select_topm(&scores, available, instance.cardinality)
}

/// UCB step: `Q_i + eta w_i ucb_i`, or `w_i ucb_i` when eta is infinite.
pub fn lfg_step(state: &PolicyState, instance: &ProblemInstance, available: ArmSet) -> Action {
    let mut scores = vec![0.0; instance.num_arms()];
    for i in available.iter() {
        let arm = &instance.arms[i];
        let index = state.ucb_index(i);
        scores[i] = match instance.eta {
            Eta::Finite(eta) => state.queues.value(i, arm.fairness_target) + eta * arm.weight * index,
            Eta::Infinite => arm.weight * index,
        };
    }
    select_topm(&scores, available, instance.cardinality)
}

/// Fairness-free optimum: top `m` available arms by `w_i u_i`.
pub fn opt_nf_step(instance: &ProblemInstance, available: ArmSet) -> Action {
    let scores: Vec<f64> = instance.arms.iter().map(|a| a.weight * a.mean_reward).collect();
    select_topm(&scores, available, instance.cardinality)
}

/// Queue-aware oracle with known means: top `m` by `Q_i / eta + w_i u_i`.
pub fn oracle_step(state: &PolicyState, instance: &ProblemInstance, available: ArmSet) -> Action {
    let inv_eta = queue_weight(instance.eta);
    let scores: Vec<f64> = instance
        .arms
        .iter()
        .enumerate()
        .map(|(i, a)| inv_eta * state.queues.value(i, a.fairness_target) + a.weight * a.mean_reward)
        .collect();
    select_topm(&scores, available, instance.cardinality)
}

pub fn opt_f_step(policy: &RandomizedPolicy, available: ArmSet, rng: &mut SimRng) -> Result<Action> {
    policy.sample(available, rng)
}

/// Absorbs the binary rewards of the pulled arms and closes the round.
///
/// `observed` must list exactly the arms of `action`, each with a 0/1 reward.
pub fn apply_feedback(state: &mut PolicyState, action: Action, observed: &[(usize, u8)]) -> Result<()> {
    let keys: ArmSet = observed.iter().map(|&(i, _)| i).collect();
    if keys != action || observed.len() != action.len() {
        return Err(Error::InvalidArgument(format!(
            "feedback for arms {keys} does not match action {action}"
        )));
    }
    for &(i, x) in observed {
        state.posteriors[i] = state.posteriors[i].update(x)?;
    }
    for &(i, x) in observed {
        let stat = &mut state.ucb_stats[i];
        stat.pulls += 1;
        stat.reward_sum += x as f64;
    }
    state.queues.advance(action);
    Ok(())
}

/// A policy bundled with its state and private random stream.
#[derive(Debug, Clone)]
pub struct Agent<'a> {
    pub state: PolicyState,
    rng: SimRng,
    benchmark: Option<&'a RandomizedPolicy>,
}

impl<'a> Agent<'a> {
    /// `benchmark` is required for [`PolicyKind::OptF`] and ignored otherwise.
    pub fn new(kind: PolicyKind, num_arms: usize, rng: SimRng, benchmark: Option<&'a RandomizedPolicy>) -> Result<Self> {
        if kind == PolicyKind::OptF && benchmark.is_none() {
            return Err(Error::InvalidArgument("opt-f needs a solved randomized policy".into()));
        }
        Ok(Agent { state: PolicyState::new(kind, num_arms), rng, benchmark })
    }

    pub fn kind(&self) -> PolicyKind {
        self.state.kind
    }

    pub fn rng_mut(&mut self) -> &mut SimRng {
        &mut self.rng
    }

    pub fn decide(&mut self, instance: &ProblemInstance, available: ArmSet) -> Result<Action> {
        Ok(match self.state.kind {
            PolicyKind::TscsfB => tscsf_b_step(&self.state, instance, available, &mut self.rng),
            PolicyKind::Lfg => lfg_step(&self.state, instance, available),
            PolicyKind::OptNf => opt_nf_step(instance, available),
            PolicyKind::Oracle => oracle_step(&self.state, instance, available),
            PolicyKind::OptF => opt_f_step(self.benchmark.expect("checked in new"), available, &mut self.rng)?,
        })
    }

    pub fn feedback(&mut self, action: Action, observed: &[(usize, u8)]) -> Result<()> {
        apply_feedback(&mut self.state, action, observed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ArmConfig;
    use crate::rng::stream;

    fn set(ids: &[usize]) -> ArmSet {
        ids.iter().map(|i| i - 1).collect()
    }

    fn inst(u: &[f64], k: &[f64], m: usize, eta: Eta) -> ProblemInstance {
        let arms = (0..u.len())
            .map(|i| ArmConfig { weight: 1.0, mean_reward: u[i], availability_prob: 1.0, fairness_target: k[i] })
            .collect();
        ProblemInstance::new(arms, m, 1000, eta).unwrap()
    }

    #[test]
    fn kinds_parse_and_have_distinct_streams() {
        for k in PolicyKind::ALL {
            assert_eq!(k.name().parse::<PolicyKind>().unwrap(), k);
        }
        let mut ids: Vec<u64> = PolicyKind::ALL.iter().map(|k| k.stream_id()).collect();
        ids.dedup();
        assert_eq!(ids.len(), 5);
        assert!(!ids.contains(&crate::rng::ENV_STREAM));
        assert!("ucb9".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn tscsf_b_empty_availability() {
        let instance = inst(&[0.5; 3], &[0.0; 3], 2, Eta::Infinite);
        let state = PolicyState::new(PolicyKind::TscsfB, 3);
        let mut rng = stream(1, 1);
        assert_eq!(tscsf_b_step(&state, &instance, ArmSet::EMPTY, &mut rng), ArmSet::EMPTY);
    }

    #[test]
    fn tscsf_b_concentrated_posteriors() {
        let instance = inst(&[0.5; 3], &[0.0; 3], 2, Eta::Infinite);
        let mut state = PolicyState::new(PolicyKind::TscsfB, 3);
        state.posteriors = vec![
            BetaPosterior::new(301, 701).unwrap(),
            BetaPosterior::new(501, 501).unwrap(),
            BetaPosterior::new(701, 301).unwrap(),
        ];
        let mut rng = stream(2, 1);
        let trials = 2000;
        let hits = (0..trials)
            .filter(|_| tscsf_b_step(&state, &instance, set(&[1, 2, 3]), &mut rng) == set(&[2, 3]))
            .count();
        assert!(hits as f64 / trials as f64 >= 0.99);
    }

    #[test]
    fn tscsf_b_queues_dominate_small_eta() {
        let instance = inst(&[0.5; 3], &[1.0, 0.0, 0.0], 1, Eta::Finite(1e-6));
        let mut state = PolicyState::new(PolicyKind::TscsfB, 3);
        state.queues = QueueState::from_parts(vec![0, 0, 0], 5).unwrap();
        assert_eq!(state.queues.value(0, 1.0), 5.0);
        let mut rng = stream(3, 1);
        for _ in 0..100 {
            assert_eq!(tscsf_b_step(&state, &instance, set(&[1, 2, 3]), &mut rng), set(&[1]));
        }
    }

    #[test]
    fn feedback_examples() {
        let instance = inst(&[0.5, 0.5], &[0.5, 0.5], 1, Eta::Finite(1.0));
        let mut state = PolicyState::new(PolicyKind::TscsfB, 2);
        apply_feedback(&mut state, ArmSet::EMPTY, &[]).unwrap();
        assert_eq!(state.queues.round(), 1);
        assert_eq!(state.queue_values(&instance), vec![0.5, 0.5]);

        let mut state = PolicyState::new(PolicyKind::TscsfB, 2);
        apply_feedback(&mut state, set(&[1]), &[(0, 1)]).unwrap();
        assert_eq!((state.posteriors[0].alpha(), state.posteriors[0].beta()), (2, 1));
        assert_eq!(state.queues.cumulative_pulls()[0], 1);

        let mut state = PolicyState::new(PolicyKind::TscsfB, 2);
        for _ in 0..100 {
            apply_feedback(&mut state, set(&[1]), &[(0, 0)]).unwrap();
        }
        assert_eq!(state.queue_values(&instance), vec![0.0, 50.0]);
    }

    #[test]
    fn feedback_mismatch_rejected() {
        let mut state = PolicyState::new(PolicyKind::Lfg, 2);
        assert!(apply_feedback(&mut state, set(&[1]), &[(1, 1)]).is_err());
        assert!(apply_feedback(&mut state, set(&[1]), &[]).is_err());
        assert!(apply_feedback(&mut state, set(&[1]), &[(0, 2)]).is_err());
        assert!(apply_feedback(&mut state, set(&[1]), &[(0, 1), (0, 1)]).is_err());
    }

    #[test]
    fn lfg_fresh_state_ties() {
        let instance = inst(&[0.5; 3], &[0.0; 3], 2, Eta::Finite(10.0));
        let state = PolicyState::new(PolicyKind::Lfg, 3);
        assert_eq!(lfg_step(&state, &instance, set(&[1, 2, 3])), set(&[1, 2]));
    }

    #[test]
    fn lfg_index_clips_at_one() {
        let instance = inst(&[0.5, 0.5], &[0.0; 2], 1, Eta::Infinite);
        let mut state = PolicyState::new(PolicyKind::Lfg, 2);
        state.ucb_stats = vec![UcbStat { pulls: 4, reward_sum: 2.0 }, UcbStat { pulls: 4, reward_sum: 3.6 }];
        // round chosen so that ln t = 6
        let t = 6f64.exp().round() as u64;
        state.queues = QueueState::from_parts(vec![4, 4], t).unwrap();
        assert_eq!(state.ucb_index(0), 1.0);
        assert_eq!(state.ucb_index(1), 1.0);
        assert_eq!(lfg_step(&state, &instance, set(&[1, 2])), set(&[1]));
    }

    #[test]
    fn opt_nf_examples() {
        let instance = inst(&[0.4, 0.5, 0.7], &[0.0; 3], 2, Eta::Infinite);
        assert_eq!(opt_nf_step(&instance, set(&[1, 2, 3])), set(&[2, 3]));
        assert_eq!(opt_nf_step(&instance, set(&[1])), set(&[1]));
        assert_eq!(opt_nf_step(&instance, ArmSet::EMPTY), ArmSet::EMPTY);
    }

    #[test]
    fn oracle_examples() {
        let instance = inst(&[0.4, 0.5, 0.7], &[1.0, 0.0, 0.0], 1, Eta::Finite(1.0));
        let mut state = PolicyState::new(PolicyKind::Oracle, 3);
        let all = set(&[1, 2, 3]);
        assert_eq!(oracle_step(&state, &instance, all), opt_nf_step(&instance, all));
        state.queues = QueueState::from_parts(vec![0, 0, 0], 100).unwrap();
        assert_eq!(oracle_step(&state, &instance, all), set(&[1]));
        let no_queue = instance.with_eta(Eta::Infinite);
        assert_eq!(oracle_step(&state, &no_queue, all), opt_nf_step(&no_queue, all));
    }

    #[test]
    fn opt_f_requires_policy() {
        assert!(Agent::new(PolicyKind::OptF, 2, stream(0, 5), None).is_err());
    }
}
