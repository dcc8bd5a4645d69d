//! Dense two-phase tableau simplex for small problems.
//!
//! Solves `max c.x` subject to rows `a.x {>=,<=,=} b` and `x >= 0`.
//! Entering columns follow Dantzig's most-negative reduced cost until a run
//! of degenerate pivots suggests cycling, after which Bland's rule is used
//! for the rest of the solve. Every choice breaks ties by lowest index, so
//! the pivot sequence is a pure function of the input.

use crate::error::{Error, Result};

pub const FEASIBILITY_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-12;
const DEGENERATE_RUN_BEFORE_BLAND: usize = 64;
const MAX_PIVOTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Ge,
    Le,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Ge => ">=",
            Sense::Le => "<=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Basic column of every surviving row after phase two, in row order.
    /// Columns past `x.len()` are slacks and surpluses.
    pub basis: Vec<usize>,
    pub pivots: usize,
}

#[derive(Debug)]
pub enum SimplexError {
    /// Phase one could not drive the artificials to zero. Holds the total
    /// residual and the input rows whose artificials stayed positive.
    Infeasible { residual: f64, rows: Vec<usize> },
    Unbounded,
    IterationLimit,
}

impl From<SimplexError> for Error {
    fn from(e: SimplexError) -> Self {
        match e {
            SimplexError::Infeasible { residual, .. } => Error::Infeasible { residual, unmet_arms: Vec::new() },
            SimplexError::Unbounded => Error::InvalidArgument("linear program is unbounded".into()),
            SimplexError::IterationLimit => Error::InvalidArgument("simplex iteration limit reached".into()),
        }
    }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    /// Original row index of each tableau row (rows can be dropped).
    origin: Vec<usize>,
    basis: Vec<usize>,
    /// Reduced costs `z_j - c_j`; last entry is the objective value.
    cost: Vec<f64>,
    ncols: usize,
    pivots: usize,
    bland: bool,
    degenerate_run: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.ncols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let inv = 1.0 / self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v *= inv;
        }
        self.rows[r][c] = 1.0;
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                row[c] = 0.0;
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for (v, p) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Rebuilds the reduced-cost row for objective `c` (maximisation).
    fn set_objective(&mut self, c: &[f64]) {
        let mut cost: Vec<f64> = (0..=self.ncols).map(|j| if j < self.ncols { -c[j] } else { 0.0 }).collect();
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = c[b];
            if cb != 0.0 {
                for (v, a) in cost.iter_mut().zip(row) {
                    *v += cb * a;
                }
            }
        }
        self.cost = cost;
    }

    fn entering(&self, allowed: usize) -> Option<usize> {
        if self.bland {
            (0..allowed).find(|&j| self.cost[j] < -COST_TOL)
        } else {
            let mut best: Option<usize> = None;
            for j in 0..allowed {
                if self.cost[j] < -COST_TOL && best.is_none_or(|b| self.cost[j] < self.cost[b]) {
                    best = Some(j);
                }
            }
            best
        }
    }

    fn leaving(&self, c: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.rows.len() {
            let a = self.rows[i][c];
            if a > PIVOT_TOL {
                let ratio = self.rhs(i).max(0.0) / a;
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - 1e-13 || (ratio <= br + 1e-13 && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
        }
        best.map(|(i, _)| i)
    }

    /// Pivots to optimality considering only columns `< allowed`.
    fn optimize(&mut self, allowed: usize) -> Result<(), SimplexError> {
        loop {
            let Some(c) = self.entering(allowed) else { return Ok(()) };
            let Some(r) = self.leaving(c) else { return Err(SimplexError::Unbounded) };
            if self.rhs(r).abs() <= FEASIBILITY_TOL {
                self.degenerate_run += 1;
                if self.degenerate_run > DEGENERATE_RUN_BEFORE_BLAND {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
            }
            self.pivot(r, c);
            if self.pivots > MAX_PIVOTS {
                return Err(SimplexError::IterationLimit);
            }
        }
    }
}

/// Solves `max objective.x` over the given rows with `x >= 0`.
pub fn solve(
    objective: &[f64],
    matrix: &[Vec<f64>],
    senses: &[Sense],
    rhs: &[f64],
) -> Result<SimplexSolution, SimplexError> {
    let n = objective.len();
    let m = matrix.len();
    assert_eq!(senses.len(), m);
    assert_eq!(rhs.len(), m);

    // Normalise to nonnegative right-hand sides.
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::with_capacity(m);
    for i in 0..m {
        assert_eq!(matrix[i].len(), n);
        if rhs[i] < 0.0 {
            let flipped = match senses[i] {
                Sense::Ge => Sense::Le,
                Sense::Le => Sense::Ge,
                Sense::Eq => Sense::Eq,
            };
            rows.push((matrix[i].iter().map(|v| -v).collect(), flipped, -rhs[i]));
        } else {
            rows.push((matrix[i].clone(), senses[i], rhs[i]));
        }
    }

    // Column layout: structural | slack/surplus (one per inequality) | artificial.
    let n_slack = rows.iter().filter(|(_, s, _)| *s != Sense::Eq).count();
    let n_art = rows.iter().filter(|(_, s, _)| *s != Sense::Le).count();
    let art_start = n + n_slack;
    let ncols = art_start + n_art;

    let mut tab_rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let (mut slack, mut art) = (n, art_start);
    for (coeffs, sense, b) in &rows {
        let mut row = vec![0.0; ncols + 1];
        row[..n].copy_from_slice(coeffs);
        row[ncols] = *b;
        match sense {
            Sense::Le => {
                row[slack] = 1.0;
                basis.push(slack);
                slack += 1;
            }
            Sense::Ge => {
                row[slack] = -1.0;
                slack += 1;
                row[art] = 1.0;
                basis.push(art);
                art += 1;
            }
            Sense::Eq => {
                row[art] = 1.0;
                basis.push(art);
                art += 1;
            }
        }
        tab_rows.push(row);
    }

    let mut tab = Tableau {
        rows: tab_rows,
        origin: (0..m).collect(),
        basis,
        cost: Vec::new(),
        ncols,
        pivots: 0,
        bland: false,
        degenerate_run: 0,
    };

    // Phase one: maximise -(sum of artificials).
    if n_art > 0 {
        let phase_one: Vec<f64> = (0..ncols).map(|j| if j >= art_start { -1.0 } else { 0.0 }).collect();
        tab.set_objective(&phase_one);
        tab.optimize(ncols)?;
        let residual = -tab.cost[ncols];
        if residual > FEASIBILITY_TOL {
            let mut unmet: Vec<usize> = (0..tab.rows.len())
                .filter(|&i| tab.basis[i] >= art_start && tab.rhs(i) > FEASIBILITY_TOL)
                .map(|i| tab.origin[i])
                .collect();
            unmet.sort_unstable();
            return Err(SimplexError::Infeasible { residual, rows: unmet });
        }

        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < tab.rows.len() {
            if tab.basis[i] >= art_start {
                match (0..art_start).find(|&j| tab.rows[i][j].abs() > FEASIBILITY_TOL) {
                    Some(j) => {
                        tab.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        tab.rows.remove(i);
                        tab.basis.remove(i);
                        tab.origin.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
        tab.bland = false;
        tab.degenerate_run = 0;
    }

    // Phase two over structural and slack columns only.
    let mut full_obj = vec![0.0; ncols];
    full_obj[..n].copy_from_slice(objective);
    tab.set_objective(&full_obj);
    tab.optimize(art_start)?;

    let mut x = vec![0.0; n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.rhs(i).max(0.0);
        }
    }
    let value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(SimplexSolution { x, value, basis: tab.basis, pivots: tab.pivots })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y st x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let sol = solve(
            &[3.0, 5.0],
            &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            &[Sense::Le, Sense::Le, Sense::Le],
            &[4.0, 12.0, 18.0],
        )
        .unwrap();
        assert!((sol.value - 36.0).abs() < 1e-9);
        assert!((sol.x[0] - 2.0).abs() < 1e-9 && (sol.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // max x + 2y st x + y = 1, x >= 0.3 -> (0.3, 0.7), 1.7
        let sol = solve(
            &[1.0, 2.0],
            &[vec![1.0, 1.0], vec![1.0, 0.0]],
            &[Sense::Eq, Sense::Ge],
            &[1.0, 0.3],
        )
        .unwrap();
        assert!((sol.value - 1.7).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_is_flipped() {
        // -x <= -2 means x >= 2; max -x -> x = 2
        let sol = solve(&[-1.0], &[vec![-1.0]], &[Sense::Le], &[-2.0]).unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_reports_rows() {
        // x + y = 1, x >= 0.8, y >= 0.8
        let err = solve(
            &[1.0, 1.0],
            &[vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            &[Sense::Eq, Sense::Ge, Sense::Ge],
            &[1.0, 0.8, 0.8],
        )
        .unwrap_err();
        match err {
            SimplexError::Infeasible { residual, rows } => {
                assert!((residual - 0.6).abs() < 1e-9);
                assert!(!rows.is_empty());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unbounded_detected() {
        let err = solve(&[1.0], &[vec![1.0]], &[Sense::Ge], &[1.0]).unwrap_err();
        assert!(matches!(err, SimplexError::Unbounded));
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        let sol = solve(
            &[1.0, 1.0],
            &[vec![1.0, 1.0], vec![2.0, 2.0]],
            &[Sense::Eq, Sense::Eq],
            &[1.0, 2.0],
        )
        .unwrap();
        assert!((sol.value - 1.0).abs() < 1e-9);
        assert_eq!(sol.basis.len(), 1);
    }
}
