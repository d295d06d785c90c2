//! Self-contained dense linear programming: a two-phase tableau simplex
//! with Bland's anti-cycling rule, plus an outer-approximation loop that
//! handles concave constraints through supergradient cuts.
//!
//! The solver is deliberately simple and deterministic: identical inputs
//! walk identical pivot sequences. Problems here are desk-scale (at most
//! a few thousand variables), so no sparsity, scaling, or warm starts.

use crate::{Error, Result};

/// Reduced costs above `-EPS` count as optimal; pivots smaller than
/// `EPS` in magnitude are treated as zero.
const EPS: f64 = 1e-10;

/// A phase-1 optimum above this is declared infeasible.
const FEAS_TOL: f64 = 1e-9;

/// Default tolerance on concave-constraint violation at the returned point.
pub const DEFAULT_CUT_TOL: f64 = 1e-9;

/// Default cap on cut rounds (LP solves) in the outer loop.
pub const DEFAULT_CUT_ROUNDS: usize = 200;

/// Maximize `objective . x` subject to `row . x <= bound` for every
/// inequality, `row . x = value` for every equality, and `x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub ineq: Vec<(Vec<f64>, f64)>,
    pub eq: Vec<(Vec<f64>, f64)>,
}

impl LinearProgram {
    pub fn maximize(objective: Vec<f64>) -> Self {
        Self { objective, ineq: Vec::new(), eq: Vec::new() }
    }

    pub fn add_less_eq(&mut self, row: Vec<f64>, bound: f64) {
        self.ineq.push((row, bound));
    }

    pub fn add_eq(&mut self, row: Vec<f64>, value: f64) {
        self.eq.push((row, value));
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if n == 0 {
            return Err(Error::Input("objective has no variables".to_string()));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.objective) {
            return Err(Error::Input("objective contains non-finite entries".to_string()));
        }
        for (row, b) in self.ineq.iter().chain(&self.eq) {
            if row.len() != n {
                return Err(Error::Input(format!(
                    "constraint row has {} entries, expected {n}",
                    row.len()
                )));
            }
            if !finite(row) || !b.is_finite() {
                return Err(Error::Input("constraint contains non-finite entries".to_string()));
            }
        }
        Ok(())
    }
}

/// Outcome of [`solve_lp`].
#[derive(Debug, Clone, PartialEq)]
pub enum LpSolution {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpSolution {
    pub fn optimal(&self) -> Option<(&[f64], f64)> {
        match self {
            LpSolution::Optimal { x, value } => Some((x, *value)),
            _ => None,
        }
    }
}

/// Solves the program with a dense two-phase simplex.
///
/// Equality rows are expanded into opposing inequality pairs before
/// phase 1, so the tableau only ever holds `<=` rows with nonnegative
/// right-hand sides (negated rows receive artificial variables). Bland's
/// rule picks the lowest-index entering column and, on ratio ties, the
/// lowest-index leaving basic variable, which rules out cycling. The
/// pivot budget `10 * (rows + cols)^2` only guards against pathological
/// stalling and surfaces as a numerical error.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.num_vars();
    let mut rows: Vec<(Vec<f64>, f64)> = lp.ineq.clone();
    for (row, value) in &lp.eq {
        rows.push((row.clone(), *value));
        rows.push((row.iter().map(|c| -c).collect(), -value));
    }
    let m = rows.len();
    let pivot_cap = 10 * (m + n) * (m + n);

    // Column layout: structurals, slacks, artificials, then the
    // right-hand side.
    let artificial_rows: Vec<usize> =
        (0..m).filter(|&i| rows[i].1 < 0.0).collect();
    let k = artificial_rows.len();
    let width = n + m + k + 1;
    let mut t = vec![vec![0.0; width]; m];
    let mut basis = vec![0usize; m];
    let mut next_artificial = n + m;
    for (i, (row, b)) in rows.iter().enumerate() {
        let flip = if *b < 0.0 { -1.0 } else { 1.0 };
        for (j, c) in row.iter().enumerate() {
            t[i][j] = flip * c;
        }
        t[i][n + i] = flip;
        t[i][width - 1] = flip * b;
        if *b < 0.0 {
            t[i][next_artificial] = 1.0;
            basis[i] = next_artificial;
            next_artificial += 1;
        } else {
            basis[i] = n + i;
        }
    }

    let mut pivots_left = pivot_cap;
    if k > 0 {
        // Phase 1: minimize the sum of artificials.
        let mut cost = vec![0.0; width - 1];
        for j in (n + m)..(n + m + k) {
            cost[j] = 1.0;
        }
        match run_simplex(&mut t, &mut basis, &cost, width - 1, &mut pivots_left)? {
            SimplexEnd::Optimal => {}
            SimplexEnd::Unbounded => {
                return Err(Error::Numerical("phase 1 reported unbounded".to_string()));
            }
        }
        let infeasibility: f64 =
            basis.iter().zip(&t).filter(|(b, _)| **b >= n + m).map(|(_, row)| row[width - 1]).sum();
        if infeasibility > FEAS_TOL {
            return Ok(LpSolution::Infeasible);
        }
        // Pivot leftover artificials out of the basis; rows where no
        // other column has weight are redundant and dropped.
        let mut i = 0;
        while i < t.len() {
            if basis[i] >= n + m {
                if let Some(j) = (0..n + m).find(|&j| t[i][j].abs() > EPS) {
                    pivot(&mut t, &mut basis, i, j);
                } else {
                    t.remove(i);
                    basis.remove(i);
                    continue;
                }
            }
            i += 1;
        }
    }

    // Phase 2: minimize the negated objective over real columns only.
    let mut cost = vec![0.0; width - 1];
    for j in 0..n {
        cost[j] = -lp.objective[j];
    }
    match run_simplex(&mut t, &mut basis, &cost, n + m, &mut pivots_left)? {
        SimplexEnd::Unbounded => Ok(LpSolution::Unbounded),
        SimplexEnd::Optimal => {
            let mut x = vec![0.0; n];
            for (i, &b) in basis.iter().enumerate() {
                if b < n {
                    x[b] = t[i][width - 1];
                }
            }
            let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
            Ok(LpSolution::Optimal { x, value })
        }
    }
}

enum SimplexEnd {
    Optimal,
    Unbounded,
}

/// Runs Bland-rule pivoting to optimality for the given minimization
/// cost vector; only columns below `col_limit` may enter.
fn run_simplex(
    t: &mut Vec<Vec<f64>>,
    basis: &mut [usize],
    cost: &[f64],
    col_limit: usize,
    pivots_left: &mut usize,
) -> Result<SimplexEnd> {
    let width = cost.len() + 1;
    // Reduced costs: start from the raw costs and eliminate the basis.
    let mut reduced = vec![0.0; width];
    reduced[..width - 1].copy_from_slice(cost);
    for (i, &b) in basis.iter().enumerate() {
        if cost[b] != 0.0 {
            let factor = cost[b];
            for j in 0..width {
                reduced[j] -= factor * t[i][j];
            }
        }
    }
    loop {
        let Some(entering) = (0..col_limit).find(|&j| reduced[j] < -EPS) else {
            return Ok(SimplexEnd::Optimal);
        };
        let mut leaving: Option<(usize, f64)> = None;
        for (i, row) in t.iter().enumerate() {
            if row[entering] > EPS {
                let ratio = row[width - 1] / row[entering];
                let better = match leaving {
                    None => true,
                    Some((best_i, best_ratio)) => {
                        ratio < best_ratio - EPS
                            || (ratio <= best_ratio + EPS && basis[i] < basis[best_i])
                    }
                };
                if better {
                    leaving = Some((i, ratio));
                }
            }
        }
        let Some((row, _)) = leaving else {
            return Ok(SimplexEnd::Unbounded);
        };
        if *pivots_left == 0 {
            return Err(Error::Numerical("simplex pivot budget exhausted".to_string()));
        }
        *pivots_left -= 1;
        pivot_with_reduced(t, basis, &mut reduced, row, entering);
    }
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
    let width = t[row].len();
    let scale = t[row][col];
    for j in 0..width {
        t[row][j] /= scale;
    }
    for i in 0..t.len() {
        if i != row && t[i][col].abs() > 0.0 {
            let factor = t[i][col];
            for j in 0..width {
                t[i][j] -= factor * t[row][j];
            }
        }
    }
    basis[row] = col;
}

fn pivot_with_reduced(
    t: &mut [Vec<f64>],
    basis: &mut [usize],
    reduced: &mut [f64],
    row: usize,
    col: usize,
) {
    pivot(t, basis, row, col);
    let width = reduced.len();
    let factor = reduced[col];
    if factor != 0.0 {
        for j in 0..width {
            reduced[j] -= factor * t[row][j];
        }
    }
}

/// A concave inequality `g(x) >= 0` presented through a first-order
/// oracle returning `g(x)` and a supergradient at `x`.
pub struct ConcaveConstraint {
    eval: Box<dyn Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync>,
}

impl ConcaveConstraint {
    pub fn new(eval: impl Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync + 'static) -> Self {
        Self { eval: Box::new(eval) }
    }

    pub fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.eval)(x)
    }
}

/// Outcome of [`solve_with_concave_cuts`].
#[derive(Debug, Clone, PartialEq)]
pub enum CutOutcome {
    /// All concave constraints hold within tolerance at `x`.
    Converged { x: Vec<f64>, value: f64 },
    /// Round cap hit; `x` is the last relaxation optimum and
    /// `worst_violation` the largest remaining constraint violation.
    RoundLimit { x: Vec<f64>, value: f64, worst_violation: f64 },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutSolution {
    pub outcome: CutOutcome,
    /// LP solves performed.
    pub rounds: usize,
    /// Linear cuts accumulated, as `(row, bound)` with `row . x <= bound`.
    pub cuts: Vec<(Vec<f64>, f64)>,
}

/// Kelley-style outer approximation: repeatedly solve the linear
/// relaxation and cut off the optimum with the linearization
/// `g(x0) + grad . (x - x0) >= 0` of every violated constraint. Because
/// each `g` is concave the linearization over-estimates it, so no
/// feasible point is ever cut away and the returned objective value can
/// only over-shoot the true optimum by the violation tolerance.
pub fn solve_with_concave_cuts(
    lp: &LinearProgram,
    constraints: &[ConcaveConstraint],
    tol: f64,
    max_rounds: usize,
) -> Result<CutSolution> {
    if !tol.is_finite() || tol < 0.0 {
        return Err(Error::Input(format!("cut tolerance must be finite and >= 0, got {tol}")));
    }
    if max_rounds == 0 {
        return Err(Error::Input("max_rounds must be at least 1".to_string()));
    }
    let n = lp.num_vars();
    let mut work = lp.clone();
    let mut cuts: Vec<(Vec<f64>, f64)> = Vec::new();
    for round in 1..=max_rounds {
        let (x, value) = match solve_lp(&work)? {
            LpSolution::Optimal { x, value } => (x, value),
            LpSolution::Infeasible => {
                return Ok(CutSolution { outcome: CutOutcome::Infeasible, rounds: round, cuts });
            }
            LpSolution::Unbounded => {
                return Ok(CutSolution { outcome: CutOutcome::Unbounded, rounds: round, cuts });
            }
        };
        let mut worst = 0.0f64;
        let mut new_cuts = Vec::new();
        for constraint in constraints {
            let (g, grad) = constraint.eval(&x);
            if !g.is_finite() || grad.len() != n || grad.iter().any(|d| !d.is_finite()) {
                return Err(Error::Numerical(
                    "concave constraint oracle returned a malformed linearization".to_string(),
                ));
            }
            if g < -tol {
                worst = worst.max(-g);
                let dot: f64 = grad.iter().zip(&x).map(|(d, v)| d * v).sum();
                let row: Vec<f64> = grad.iter().map(|d| -d).collect();
                new_cuts.push((row, g - dot));
            }
        }
        if new_cuts.is_empty() {
            return Ok(CutSolution { outcome: CutOutcome::Converged { x, value }, rounds: round, cuts });
        }
        if round == max_rounds {
            return Ok(CutSolution {
                outcome: CutOutcome::RoundLimit { x, value, worst_violation: worst },
                rounds: round,
                cuts,
            });
        }
        for (row, bound) in new_cuts {
            work.add_less_eq(row.clone(), bound);
            cuts.push((row, bound));
        }
    }
    unreachable!("loop returns on or before max_rounds");
}
