//! Domain types shared by every policy: arm configuration, problem instance,
//! Beta posteriors, virtual fairness queues and additive top-m selection.
//!
//! Arms are indexed from zero internally. Everything user-facing (config
//! files, traces, CSVs) numbers arms from one.

use std::fmt;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of arms an [`ArmSet`] can hold.
pub const MAX_ARMS: usize = 64;

/// A set of arm indices stored as a bitmask.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArmSet(u64);

impl ArmSet {
    pub const EMPTY: ArmSet = ArmSet(0);

    pub fn from_bits(bits: u64) -> Self {
        ArmSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// The set `{0, .., n-1}`.
    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_ARMS);
        if n == MAX_ARMS {
            ArmSet(u64::MAX)
        } else {
            ArmSet((1u64 << n) - 1)
        }
    }

    pub fn contains(self, arm: usize) -> bool {
        arm < MAX_ARMS && self.0 & (1u64 << arm) != 0
    }

    pub fn insert(&mut self, arm: usize) {
        assert!(arm < MAX_ARMS, "arm index {arm} exceeds {MAX_ARMS}");
        self.0 |= 1u64 << arm;
    }

    pub fn remove(&mut self, arm: usize) {
        if arm < MAX_ARMS {
            self.0 &= !(1u64 << arm);
        }
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: ArmSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Arms in ascending index order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i)
            }
        })
    }
}

impl FromIterator<usize> for ArmSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = ArmSet::EMPTY;
        for i in iter {
            s.insert(i);
        }
        s
    }
}

impl fmt::Debug for ArmSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Formats as one-based ids, e.g. `{1,3}`.
impl fmt::Display for ArmSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (n, i) in self.iter().enumerate() {
            if n > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        f.write_str("}")
    }
}

/// The arms pulled in one round.
pub type Action = ArmSet;

/// Static description of one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmConfig {
    pub weight: f64,
    /// True Bernoulli mean. Only benchmark policies may read it.
    pub mean_reward: f64,
    pub availability_prob: f64,
    pub fairness_target: f64,
}

impl ArmConfig {
    pub fn validate(&self, id: usize) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return Err(Error::Config(format!("arm {}: weight must be >= 0", id + 1)));
        }
        if !unit(self.mean_reward) {
            return Err(Error::Config(format!("arm {}: mean reward outside [0,1]", id + 1)));
        }
        if !unit(self.availability_prob) {
            return Err(Error::Config(format!("arm {}: availability outside [0,1]", id + 1)));
        }
        if !unit(self.fairness_target) {
            return Err(Error::Config(format!("arm {}: fairness target outside [0,1]", id + 1)));
        }
        Ok(())
    }
}

/// Trade-off weight between queue pressure and reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Eta {
    Finite(f64),
    Infinite,
}

impl Eta {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_infinite() && value > 0.0 {
            Ok(Eta::Infinite)
        } else if value > 0.0 && value.is_finite() {
            Ok(Eta::Finite(value))
        } else {
            Err(Error::Config(format!("eta must be positive, got {value}")))
        }
    }

    /// `1/eta`, zero for the infinite case.
    pub fn inverse(self) -> f64 {
        match self {
            Eta::Finite(v) => 1.0 / v,
            Eta::Infinite => 0.0,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Eta::Infinite)
    }

    /// Label used in file names and CSV rows.
    pub fn label(self) -> String {
        match self {
            Eta::Finite(v) => format!("{v}"),
            Eta::Infinite => "inf".to_string(),
        }
    }
}

impl fmt::Display for Eta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub arms: Vec<ArmConfig>,
    pub cardinality: usize,
    pub horizon: usize,
    pub eta: Eta,
}

impl ProblemInstance {
    pub fn new(arms: Vec<ArmConfig>, cardinality: usize, horizon: usize, eta: Eta) -> Result<Self> {
        let inst = ProblemInstance { arms, cardinality, horizon, eta };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.arms.len();
        if n == 0 || n > MAX_ARMS {
            return Err(Error::Config(format!("number of arms must be in 1..={MAX_ARMS}, got {n}")));
        }
        if self.cardinality == 0 || self.cardinality > n {
            return Err(Error::Config(format!(
                "cardinality must be in 1..={n}, got {}",
                self.cardinality
            )));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        if let Eta::Finite(v) = self.eta {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("eta must be positive, got {v}")));
            }
        }
        for (i, arm) in self.arms.iter().enumerate() {
            arm.validate(i)?;
        }
        Ok(())
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn with_eta(&self, eta: Eta) -> Self {
        ProblemInstance { eta, ..self.clone() }
    }

    pub fn all_arms(&self) -> ArmSet {
        ArmSet::full(self.num_arms())
    }

    pub fn fairness_targets(&self) -> Vec<f64> {
        self.arms.iter().map(|a| a.fairness_target).collect()
    }

    pub fn max_weight(&self) -> f64 {
        self.arms.iter().map(|a| a.weight).fold(0.0, f64::max)
    }

    /// Weighted reward `sum_{i in action} w_i x_i`.
    pub fn weighted_reward(&self, action: Action, rewards: &[f64]) -> f64 {
        action.iter().map(|i| self.arms[i].weight * rewards[i]).sum()
    }
}

/// Beta(alpha, beta) posterior over a Bernoulli mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BetaPosterior {
    alpha: u64,
    beta: u64,
}

impl Default for BetaPosterior {
    fn default() -> Self {
        BetaPosterior::uniform()
    }
}

impl BetaPosterior {
    pub fn uniform() -> Self {
        BetaPosterior { alpha: 1, beta: 1 }
    }

    pub fn new(alpha: u64, beta: u64) -> Result<Self> {
        if alpha == 0 || beta == 0 {
            return Err(Error::InvalidArgument(format!(
                "beta parameters must be >= 1, got ({alpha}, {beta})"
            )));
        }
        Ok(BetaPosterior { alpha, beta })
    }

    pub fn alpha(&self) -> u64 {
        self.alpha
    }

    pub fn beta(&self) -> u64 {
        self.beta
    }

    /// Number of rewards absorbed since the uniform prior.
    pub fn pull_count(&self) -> u64 {
        self.alpha + self.beta - 2
    }

    /// Mean of the absorbed rewards, `None` before the first update.
    pub fn empirical_mean(&self) -> Option<f64> {
        match self.pull_count() {
            0 => None,
            h => Some((self.alpha - 1) as f64 / h as f64),
        }
    }

    /// Mean of the posterior distribution, `alpha / (alpha + beta)`.
    pub fn posterior_mean(&self) -> f64 {
        self.alpha as f64 / (self.alpha + self.beta) as f64
    }

    pub fn update(self, x: u8) -> Result<Self> {
        match x {
            0 => Ok(BetaPosterior { beta: self.beta + 1, ..self }),
            1 => Ok(BetaPosterior { alpha: self.alpha + 1, ..self }),
            _ => Err(Error::InvalidArgument(format!("reward must be 0 or 1, got {x}"))),
        }
    }

    /// Draws `theta ~ Beta(alpha, beta)`.
    ///
    /// Delegates to `rand_distr::Beta` (Cheng's rejection samplers), so
    /// the number of primitive draws per call is random but fully
    /// determined by the generator state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // alpha, beta >= 1 always satisfy the distribution's preconditions.
        let dist = Beta::new(self.alpha as f64, self.beta as f64).expect("valid beta parameters");
        dist.sample(rng)
    }
}

/// Virtual fairness queues, kept as cumulative pull totals.
///
/// Queue lengths are recomputed from `round` and the totals on every read
/// so no floating-point drift accumulates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueState {
    cumulative_pulls: Vec<u64>,
    round: u64,
}

impl QueueState {
    pub fn new(num_arms: usize) -> Self {
        QueueState { cumulative_pulls: vec![0; num_arms], round: 0 }
    }

    pub fn from_parts(cumulative_pulls: Vec<u64>, round: u64) -> Result<Self> {
        if let Some(p) = cumulative_pulls.iter().find(|&&p| p > round) {
            return Err(Error::InvalidArgument(format!("pull total {p} exceeds round {round}")));
        }
        Ok(QueueState { cumulative_pulls, round })
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn cumulative_pulls(&self) -> &[u64] {
        &self.cumulative_pulls
    }

    /// `max(t * k - pulls, 0)` for one arm.
    pub fn value(&self, arm: usize, fairness_target: f64) -> f64 {
        (self.round as f64 * fairness_target - self.cumulative_pulls[arm] as f64).max(0.0)
    }

    /// Closes the current round with `action` as the pulled set.
    pub fn advance(&mut self, action: Action) {
        for i in action.iter() {
            self.cumulative_pulls[i] += 1;
        }
        self.round += 1;
    }
}

/// Free-function form of [`QueueState::value`].
pub fn queue_value(q: &QueueState, arm: usize, fairness_target: f64) -> f64 {
    q.value(arm, fairness_target)
}

/// Picks the `min(m, |available|)` available arms with the largest scores.
///
/// Equal scores are broken towards the lower arm index. Because the
/// objective is additive and callers only pass nonnegative scores, the
/// result maximises the total score over all subsets of size at most `m`.
pub fn select_topm(scores: &[f64], available: ArmSet, m: usize) -> Action {
    if m == 0 || available.is_empty() {
        return ArmSet::EMPTY;
    }
    let mut arms: Vec<usize> = available.iter().collect();
    if arms.len() > m {
        // Stable sort on descending score keeps ascending index among ties.
        arms.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        arms.truncate(m);
    }
    arms.into_iter().collect()
}
