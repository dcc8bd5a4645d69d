//! Round generation: synthetic worlds with independent per-arm
//! availability and Bernoulli rewards, plus replay of recorded traces.
//!
//! # Trace format
//!
//! A trace is a UTF-8 text file with one record per round:
//!
//! ```text
//! # arms=5
//! 0; 1,3; 1=0.6,3=0.9
//! 1; 2; 2=1
//! ```
//!
//! Fields are separated by `;`: the round index (consecutive from 0), the
//! comma-separated one-based ids of available arms, and comma-separated
//! `arm=reward` pairs with rewards in `[0,1]`. Every available arm must
//! carry a reward; unavailable arms may carry one too (full-information
//! traces). Lines starting with `#` are comments, except that a
//! `# arms=N` line fixes the number of arms (otherwise the largest id seen).

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{ArmSet, ProblemInstance, MAX_ARMS};

/// One round of the world: who is available and what every arm would pay.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundSample {
    pub availability: ArmSet,
    /// Reward of every arm, pulled or not. Synthetic rounds hold 0/1; replayed
    /// rounds hold the raw recorded value (0 where nothing was recorded).
    pub rewards: Vec<f64>,
}

/// Draws a synthetic round.
///
/// Consumes exactly `2N` uniforms: availability of arms `1..N` in order,
/// then the rewards of arms `1..N` in order.
pub fn sample_round<R: Rng + ?Sized>(instance: &ProblemInstance, rng: &mut R) -> RoundSample {
    let mut availability = ArmSet::EMPTY;
    for (i, arm) in instance.arms.iter().enumerate() {
        if rng.random::<f64>() < arm.availability_prob {
            availability.insert(i);
        }
    }
    let rewards = instance
        .arms
        .iter()
        .map(|arm| if rng.random::<f64>() < arm.mean_reward { 1.0 } else { 0.0 })
        .collect();
    RoundSample { availability, rewards }
}

/// Turns a `[0,1]` reward into a Bernoulli trial with that success probability.
pub fn bernoullize<R: Rng + ?Sized>(raw: f64, rng: &mut R) -> Result<u8> {
    if !(0.0..=1.0).contains(&raw) {
        return Err(Error::InvalidArgument(format!("raw reward {raw} outside [0,1]")));
    }
    Ok((rng.random::<f64>() < raw) as u8)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayRound {
    pub availability: ArmSet,
    /// `(arm, raw reward)` pairs in ascending arm order.
    pub rewards: Vec<(usize, f64)>,
}

impl ReplayRound {
    pub fn to_sample(&self, num_arms: usize) -> RoundSample {
        let mut rewards = vec![0.0; num_arms];
        for &(arm, r) in &self.rewards {
            rewards[arm] = r;
        }
        RoundSample { availability: self.availability, rewards }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayTrace {
    num_arms: usize,
    rounds: Vec<ReplayRound>,
}

impl ReplayTrace {
    pub fn new(num_arms: usize, rounds: Vec<ReplayRound>) -> Result<Self> {
        if num_arms == 0 || num_arms > MAX_ARMS {
            return Err(Error::InvalidArgument(format!("trace needs 1..={MAX_ARMS} arms")));
        }
        for (t, round) in rounds.iter().enumerate() {
            if !round.availability.is_subset(ArmSet::full(num_arms)) {
                return Err(Error::InvalidArgument(format!("round {t}: arm id beyond {num_arms}")));
            }
            let mut recorded = ArmSet::EMPTY;
            for &(arm, r) in &round.rewards {
                if arm >= num_arms {
                    return Err(Error::InvalidArgument(format!("round {t}: arm id beyond {num_arms}")));
                }
                if !(0.0..=1.0).contains(&r) {
                    return Err(Error::InvalidArgument(format!("round {t}: reward {r} outside [0,1]")));
                }
                recorded.insert(arm);
            }
            if !round.availability.is_subset(recorded) {
                return Err(Error::InvalidArgument(format!(
                    "round {t}: available arms without a recorded reward"
                )));
            }
        }
        Ok(ReplayTrace { num_arms, rounds })
    }

    /// Full-information trace from a sequence of synthetic rounds.
    pub fn from_samples(num_arms: usize, samples: &[RoundSample]) -> Result<Self> {
        let rounds = samples
            .iter()
            .map(|s| ReplayRound {
                availability: s.availability,
                rewards: s.rewards.iter().copied().enumerate().collect(),
            })
            .collect();
        ReplayTrace::new(num_arms, rounds)
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn rounds(&self) -> &[ReplayRound] {
        &self.rounds
    }

    pub fn replay_round(&self, t: usize) -> Result<&ReplayRound> {
        self.rounds.get(t).ok_or(Error::OutOfRange { index: t, len: self.rounds.len() })
    }

    /// Per-arm fraction of rounds in which the arm is available.
    pub fn empirical_availability(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.num_arms];
        for round in &self.rounds {
            for i in round.availability.iter() {
                counts[i] += 1;
            }
        }
        let len = self.rounds.len().max(1) as f64;
        counts.into_iter().map(|c| c as f64 / len).collect()
    }

    /// Per-arm mean of recorded rewards over rounds where the arm is available.
    pub fn empirical_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.num_arms];
        let mut counts = vec![0usize; self.num_arms];
        for round in &self.rounds {
            for &(arm, r) in &round.rewards {
                if round.availability.contains(arm) {
                    sums[arm] += r;
                    counts[arm] += 1;
                }
            }
        }
        sums.iter()
            .zip(&counts)
            .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# arms={}\n", self.num_arms);
        for (t, round) in self.rounds.iter().enumerate() {
            let avail: Vec<String> = round.availability.iter().map(|i| (i + 1).to_string()).collect();
            let rewards: Vec<String> =
                round.rewards.iter().map(|(i, r)| format!("{}={}", i + 1, r)).collect();
            let _ = writeln!(out, "{t}; {}; {}", avail.join(","), rewards.join(","));
        }
        out
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse { path: origin.to_path_buf(), line, msg };
        let mut declared_arms = None;
        let mut max_id = 0usize;
        let mut rounds = Vec::new();
        for (lineno, line) in text.lines().enumerate().map(|(n, l)| (n + 1, l.trim())) {
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(n) = comment.trim().strip_prefix("arms=") {
                    let n: usize =
                        n.trim().parse().map_err(|_| err(lineno, format!("bad arm count {n:?}")))?;
                    declared_arms = Some(n);
                }
                continue;
            }
            let fields: Vec<&str> = line.split(';').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(err(lineno, format!("expected 3 ';'-separated fields, got {}", fields.len())));
            }
            let index: usize =
                fields[0].parse().map_err(|_| err(lineno, format!("bad round index {:?}", fields[0])))?;
            if index != rounds.len() {
                return Err(err(lineno, format!("round index {index}, expected {}", rounds.len())));
            }
            let parse_id = |s: &str| -> Result<usize> {
                let id: usize = s.trim().parse().map_err(|_| err(lineno, format!("bad arm id {s:?}")))?;
                if id == 0 || id > MAX_ARMS {
                    return Err(err(lineno, format!("arm id {id} outside 1..={MAX_ARMS}")));
                }
                Ok(id)
            };
            let mut availability = ArmSet::EMPTY;
            for s in fields[1].split(',').filter(|s| !s.trim().is_empty()) {
                let id = parse_id(s)?;
                max_id = max_id.max(id);
                availability.insert(id - 1);
            }
            let mut rewards = Vec::new();
            for pair in fields[2].split(',').filter(|s| !s.trim().is_empty()) {
                let (id, r) = pair
                    .split_once('=')
                    .ok_or_else(|| err(lineno, format!("expected arm=reward, got {pair:?}")))?;
                let id = parse_id(id)?;
                let r: f64 = r.trim().parse().map_err(|_| err(lineno, format!("bad reward {r:?}")))?;
                max_id = max_id.max(id);
                rewards.push((id - 1, r));
            }
            rewards.sort_by_key(|&(i, _)| i);
            rounds.push(ReplayRound { availability, rewards });
        }
        let num_arms = declared_arms.unwrap_or(max_id);
        if max_id > num_arms {
            return Err(err(0, format!("arm id {max_id} exceeds declared arm count {num_arms}")));
        }
        ReplayTrace::new(num_arms, rounds).map_err(|e| err(0, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ReplayTrace::parse(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Source of rounds for one replication.
#[derive(Debug, Clone)]
pub enum Environment<'a> {
    Synthetic { instance: &'a ProblemInstance, rng: crate::rng::SimRng },
    Replay { trace: &'a ReplayTrace, cursor: usize },
}

impl Environment<'_> {
    pub fn next_round(&mut self) -> Option<RoundSample> {
        match self {
            Environment::Synthetic { instance, rng } => Some(sample_round(instance, rng)),
            Environment::Replay { trace, cursor } => {
                let round = trace.rounds.get(*cursor)?;
                *cursor += 1;
                Some(round.to_sample(trace.num_arms))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ArmConfig, Eta};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn instance(means: &[f64], avail: &[f64]) -> ProblemInstance {
        let arms = means
            .iter()
            .zip(avail)
            .map(|(&u, &p)| ArmConfig { weight: 1.0, mean_reward: u, availability_prob: p, fairness_target: 0.0 })
            .collect();
        ProblemInstance::new(arms, 1, 10, Eta::Infinite).unwrap()
    }

    #[test]
    fn degenerate_availability() {
        let inst = instance(&[0.5, 0.5, 0.5], &[1.0, 1.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(sample_round(&inst, &mut rng).availability, [0, 1].into_iter().collect());
        }
    }

    #[test]
    fn degenerate_mean() {
        let inst = instance(&[1.0, 0.0], &[0.5, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let s = sample_round(&inst, &mut rng);
            assert_eq!(s.rewards, vec![1.0, 0.0]);
        }
    }

    #[test]
    fn availability_frequencies() {
        let inst = instance(&[0.4, 0.5, 0.7], &[0.9, 0.8, 0.7]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            for i in sample_round(&inst, &mut rng).availability.iter() {
                counts[i] += 1;
            }
        }
        for (c, p) in counts.iter().zip([0.9, 0.8, 0.7]) {
            assert!((*c as f64 / n as f64 - p).abs() < 0.01);
        }
    }

    #[test]
    fn bernoullize_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            assert_eq!(bernoullize(1.0, &mut rng).unwrap(), 1);
            assert_eq!(bernoullize(0.0, &mut rng).unwrap(), 0);
        }
        let n = 100_000;
        let ones: u64 = (0..n).map(|_| bernoullize(0.62, &mut rng).unwrap() as u64).sum();
        assert!((ones as f64 / n as f64 - 0.62).abs() < 0.01);
        assert!(bernoullize(1.5, &mut rng).is_err());
        assert!(bernoullize(-0.1, &mut rng).is_err());
    }

    #[test]
    fn replay_bounds_and_round_trip() {
        let inst = instance(&[0.3, 0.6, 0.9], &[0.5, 0.5, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<RoundSample> = (0..3).map(|_| sample_round(&inst, &mut rng)).collect();
        let trace = ReplayTrace::from_samples(3, &samples).unwrap();
        assert_eq!(trace.replay_round(0).unwrap().to_sample(3), samples[0]);
        assert!(matches!(trace.replay_round(3), Err(Error::OutOfRange { index: 3, len: 3 })));

        let parsed = ReplayTrace::parse(&trace.to_text(), Path::new("mem")).unwrap();
        assert_eq!(parsed, trace);
        let mut env = Environment::Replay { trace: &parsed, cursor: 0 };
        let replayed: Vec<RoundSample> = std::iter::from_fn(|| env.next_round()).collect();
        assert_eq!(replayed, samples);
    }

    #[test]
    fn parse_errors() {
        let p = Path::new("t");
        assert!(ReplayTrace::parse("0; 1; 1=1.5\n", p).is_err());
        assert!(ReplayTrace::parse("0; 1; 2=0.5\n", p).is_err());
        assert!(ReplayTrace::parse("1; 1; 1=0.5\n", p).is_err());
        assert!(ReplayTrace::parse("0; 1\n", p).is_err());
        assert!(ReplayTrace::parse("# arms=2\n0; 3; 3=0.5\n", p).is_err());
        let t = ReplayTrace::parse("# arms=4\n0; ; \n1; 2; 2=0.5\n", p).unwrap();
        assert_eq!(t.num_arms(), 4);
        assert_eq!(t.len(), 2);
        assert!(t.replay_round(0).unwrap().availability.is_empty());
    }

    #[test]
    fn empirical_estimates() {
        let t = ReplayTrace::parse("0; 1,2; 1=1,2=0.5\n1; 1; 1=0.5\n", Path::new("t")).unwrap();
        assert_eq!(t.empirical_availability(), vec![1.0, 0.5]);
        assert_eq!(t.empirical_means(), vec![0.75, 0.5]);
    }
}
