//! The fairness-constrained benchmark policy.
//!
//! Columns are pairs `(S, A)` of an availability set `S` with positive
//! probability and an action `A ⊆ S, |A| <= m`. The program maximises
//! `sum P(S) q_S(A) sum_{i in A} w_i u_i` subject to one `>=` row per arm
//! (expected pull rate at least `k_i`) and one `=` row per availability set
//! (the action distribution for `S` sums to one). The completeness rows
//! imply `q <= 1`, so only `q >= 0` is passed to the solver.

pub mod simplex;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Action, ArmSet, ProblemInstance};
pub use simplex::Sense;

pub const MAX_ENUMERATED_SET: usize = 20;
pub const MAX_LP_ARMS: usize = 12;
/// Dense tableau size limit (rows times columns).
const MAX_TABLEAU_CELLS: usize = 50_000_000;
const DROP_BELOW: f64 = 1e-12;

/// All subsets of `set` with at most `m` arms, ordered by size and then
/// lexicographically by their ascending index lists. Includes the empty set.
pub fn enumerate_actions(set: ArmSet, m: usize) -> Result<Vec<Action>> {
    if set.len() > MAX_ENUMERATED_SET {
        return Err(Error::Guard(format!(
            "cannot enumerate subsets of a {}-arm set (limit {MAX_ENUMERATED_SET})",
            set.len()
        )));
    }
    let members: Vec<usize> = set.iter().collect();
    let mut out = vec![ArmSet::EMPTY];
    for size in 1..=m.min(members.len()) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            out.push(idx.iter().map(|&j| members[j]).collect());
            // Advance to the next combination in lexicographic order.
            let Some(pos) = (0..size).rev().find(|&p| idx[p] < members.len() - size + p) else { break };
            idx[pos] += 1;
            for p in pos + 1..size {
                idx[p] = idx[p - 1] + 1;
            }
        }
    }
    Ok(out)
}

/// Probability of each availability set under independent per-arm
/// availability, for every set with positive mass, in ascending bitmask order.
pub fn availability_distribution(availability: &[f64]) -> Vec<(ArmSet, f64)> {
    let n = availability.len();
    (0u64..1 << n)
        .filter_map(|bits| {
            let prob: f64 = availability
                .iter()
                .enumerate()
                .map(|(i, &p)| if bits & (1 << i) != 0 { p } else { 1.0 - p })
                .product();
            (prob > 0.0).then_some((ArmSet::from_bits(bits), prob))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpColumn {
    pub set: ArmSet,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub num_arms: usize,
    pub cardinality: usize,
    /// `(S, P(S))` for every availability set kept.
    pub sets: Vec<(ArmSet, f64)>,
    pub columns: Vec<LpColumn>,
    pub objective: Vec<f64>,
    /// Rows `0..N` are fairness rows, then one completeness row per set.
    pub matrix: Vec<Vec<f64>>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<f64>,
}

impl LpProblem {
    pub fn num_fairness_rows(&self) -> usize {
        self.num_arms
    }

    pub fn column_index(&self, set: ArmSet, action: Action) -> Option<usize> {
        self.columns.iter().position(|c| c.set == set && c.action == action)
    }

    /// Writes the tableau as plain text. See the README for the layout.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# fairness-constrained benchmark LP (maximize)");
        let _ = writeln!(
            out,
            "arms {} cardinality {} sets {} columns {} rows {}",
            self.num_arms,
            self.cardinality,
            self.sets.len(),
            self.columns.len(),
            self.matrix.len()
        );
        for (set, p) in &self.sets {
            let _ = writeln!(out, "set {set} prob {p:.17e}");
        }
        for (j, col) in self.columns.iter().enumerate() {
            let _ = writeln!(out, "col {j} S={} A={} obj {:.17e}", col.set, col.action, self.objective[j]);
        }
        for (r, row) in self.matrix.iter().enumerate() {
            let kind = if r < self.num_arms { format!("fair{}", r + 1) } else { "complete".to_string() };
            let _ = write!(out, "row {r} {kind} {} {:.17e} :", self.senses[r].symbol(), self.rhs[r]);
            for (j, v) in row.iter().enumerate() {
                if *v != 0.0 {
                    let _ = write!(out, " {j}:{v:.17e}");
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn build_lp(instance: &ProblemInstance) -> Result<LpProblem> {
    let n = instance.num_arms();
    if n > MAX_LP_ARMS {
        return Err(Error::Guard(format!("LP needs N <= {MAX_LP_ARMS}, got {n}")));
    }
    let m = instance.cardinality;
    let availability: Vec<f64> = instance.arms.iter().map(|a| a.availability_prob).collect();
    let sets = availability_distribution(&availability);
    let reward: Vec<f64> = instance.arms.iter().map(|a| a.weight * a.mean_reward).collect();

    let mut columns = Vec::new();
    for &(set, _) in &sets {
        for action in enumerate_actions(set, m)? {
            columns.push(LpColumn { set, action });
        }
    }
    let rows = n + sets.len();
    if rows.saturating_mul(columns.len()) > MAX_TABLEAU_CELLS {
        return Err(Error::Guard(format!(
            "LP with {rows} rows and {} columns exceeds the dense size limit",
            columns.len()
        )));
    }

    let set_row: BTreeMap<ArmSet, (usize, f64)> =
        sets.iter().enumerate().map(|(k, &(s, p))| (s, (n + k, p))).collect();
    let mut matrix = vec![vec![0.0; columns.len()]; rows];
    let mut objective = Vec::with_capacity(columns.len());
    for (j, col) in columns.iter().enumerate() {
        let (row, prob) = set_row[&col.set];
        objective.push(prob * col.action.iter().map(|i| reward[i]).sum::<f64>());
        for i in col.action.iter() {
            matrix[i][j] = prob;
        }
        matrix[row][j] = 1.0;
    }
    let mut senses = vec![Sense::Ge; n];
    senses.extend(std::iter::repeat_n(Sense::Eq, sets.len()));
    let mut rhs = instance.fairness_targets();
    rhs.extend(std::iter::repeat_n(1.0, sets.len()));

    Ok(LpProblem { num_arms: n, cardinality: m, sets, columns, objective, matrix, senses, rhs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub basis: Vec<usize>,
}

/// Solves the program; infeasible fairness vectors surface as
/// [`Error::Infeasible`] naming the arms whose rows could not be met.
pub fn solve_lp(lp: &LpProblem) -> Result<LpSolution> {
    match simplex::solve(&lp.objective, &lp.matrix, &lp.senses, &lp.rhs) {
        Ok(sol) => Ok(LpSolution { x: sol.x, value: sol.value, basis: sol.basis }),
        Err(simplex::SimplexError::Infeasible { residual, rows }) => Err(Error::Infeasible {
            residual,
            unmet_arms: rows.into_iter().filter(|&r| r < lp.num_arms).collect(),
        }),
        Err(e) => Err(e.into()),
    }
}

/// Action distribution per availability set.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedPolicy {
    pub table: BTreeMap<ArmSet, Vec<(Action, f64)>>,
    /// Expected per-round weighted reward.
    pub optimal_value: f64,
}

impl RandomizedPolicy {
    /// Samples an action for availability set `set` by inverse CDF over the
    /// stored (canonically ordered) action list. Uses one uniform draw.
    pub fn sample<R: Rng + ?Sized>(&self, set: ArmSet, rng: &mut R) -> Result<Action> {
        let dist = self.table.get(&set).ok_or_else(|| Error::UnknownAvailabilitySet(set.to_string()))?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(action, p) in dist {
            acc += p;
            if u < acc {
                return Ok(action);
            }
        }
        Ok(dist.last().map(|&(a, _)| a).unwrap_or(ArmSet::EMPTY))
    }

    /// Long-run pull rate of each arm: `sum_S P(S) sum_{A ∋ i} q_S(A)`.
    pub fn inclusion_rates(&self, sets: &[(ArmSet, f64)], num_arms: usize) -> Vec<f64> {
        let mut rates = vec![0.0; num_arms];
        for &(set, prob) in sets {
            if let Some(dist) = self.table.get(&set) {
                for &(action, q) in dist {
                    for i in action.iter() {
                        rates[i] += prob * q;
                    }
                }
            }
        }
        rates
    }
}

/// Packages a solution as a policy, dropping negligible actions and
/// renormalising every set's distribution to sum to one.
pub fn extract_policy(lp: &LpProblem, solution: &LpSolution) -> RandomizedPolicy {
    let mut table: BTreeMap<ArmSet, Vec<(Action, f64)>> = BTreeMap::new();
    for (col, &q) in lp.columns.iter().zip(&solution.x) {
        let entry = table.entry(col.set).or_default();
        if q >= DROP_BELOW {
            entry.push((col.action, q));
        }
    }
    for dist in table.values_mut() {
        normalize(dist);
    }
    RandomizedPolicy { table, optimal_value: solution.value }
}

fn normalize(dist: &mut [(Action, f64)]) {
    let total: f64 = dist.iter().map(|&(_, p)| p).sum();
    if dist.is_empty() || total <= 0.0 {
        return;
    }
    for (_, p) in dist.iter_mut() {
        *p /= total;
    }
    let (last, head) = dist.split_last_mut().expect("nonempty");
    last.1 = 1.0 - head.iter().map(|&(_, p)| p).sum::<f64>();
}

/// Builds, solves and extracts in one step.
pub fn optimal_fair_policy(instance: &ProblemInstance) -> Result<(LpProblem, RandomizedPolicy)> {
    let lp = build_lp(instance)?;
    let sol = solve_lp(&lp)?;
    let policy = extract_policy(&lp, &sol);
    Ok((lp, policy))
}
