//! Dense two-phase primal simplex.
//!
//! Minimizes `c' x` over linear equality/inequality rows with nonnegative
//! or free variables. Free variables are split internally. Pricing uses
//! Dantzig's rule with smallest-index tie-breaking and falls back to
//! Bland's rule after a degenerate stall, which guarantees termination.
//! All pivots are deterministic, so identical inputs give bit-identical
//! solutions.

use crate::error::{Error, Result};

/// Feasibility/optimality tolerance.
const LP_TOL: f64 = 1e-9;
/// Consecutive non-improving pivots before switching to Bland's rule.
const STALL_LIMIT: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Le,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarBound {
    NonNeg,
    Free,
}

/// One constraint row with sparse coefficients.
#[derive(Debug, Clone)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A linear program in minimization form.
#[derive(Debug, Clone)]
pub struct LpProblem {
    /// Objective coefficients, one per variable.
    pub objective: Vec<f64>,
    pub rows: Vec<LpRow>,
    pub bounds: Vec<VarBound>,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>, rows: Vec<LpRow>, bounds: Vec<VarBound>) -> Result<Self> {
        if objective.len() != bounds.len() {
            return Err(Error::DimensionMismatch {
                expected: objective.len(),
                actual: bounds.len(),
            });
        }
        for row in &rows {
            for &(idx, coef) in &row.coeffs {
                if idx >= objective.len() {
                    return Err(Error::DimensionMismatch {
                        expected: objective.len(),
                        actual: idx + 1,
                    });
                }
                if !coef.is_finite() {
                    return Err(Error::InvalidParameter("non-finite LP coefficient".into()));
                }
            }
            if !row.rhs.is_finite() {
                return Err(Error::InvalidParameter("non-finite LP right-hand side".into()));
            }
        }
        Ok(LpProblem {
            objective,
            rows,
            bounds,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

struct Tableau {
    /// m x (ncols + 1) rows; last column is the right-hand side.
    rows: Vec<Vec<f64>>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    ncols: usize,
    artificial_start: usize,
    iterations: usize,
    bland: bool,
    stall: usize,
    last_objective: f64,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.ncols]
    }

    fn objective_value(&self) -> f64 {
        -self.obj[self.ncols]
    }

    /// Reduced-cost row for the cost vector `c` given the current basis.
    fn rebuild_objective(&mut self, c: &[f64]) {
        let mut obj = vec![0.0; self.ncols + 1];
        obj[..c.len()].copy_from_slice(c);
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = if b < c.len() { c[b] } else { 0.0 };
            if cb != 0.0 {
                for j in 0..=self.ncols {
                    obj[j] -= cb * self.rows[i][j];
                }
            }
        }
        self.obj = obj;
    }

    fn entering(&self, barred_from: usize) -> Option<usize> {
        if self.bland {
            (0..self.ncols)
                .find(|&j| j < barred_from && self.obj[j] < -LP_TOL)
        } else {
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.ncols.min(barred_from) {
                let rc = self.obj[j];
                if rc < -LP_TOL && best.map_or(true, |(_, b)| rc < b) {
                    best = Some((j, rc));
                }
            }
            best.map(|(j, _)| j)
        }
    }

    /// Minimum-ratio row; ties broken by the smallest basic variable index.
    fn leaving(&self, enter: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.rows.len() {
            let a = self.rows[i][enter];
            if a > LP_TOL {
                let ratio = self.rhs(i) / a;
                match best {
                    None => best = Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - 1e-12
                            || ((ratio - br).abs() <= 1e-12 && self.basis[i] < self.basis[bi])
                        {
                            best = Some((i, ratio));
                        }
                    }
                }
            }
        }
        best.map(|(i, _)| i)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v /= p;
        }
        for i in 0..self.rows.len() {
            if i != row {
                let f = self.rows[i][col];
                if f != 0.0 {
                    for j in 0..=self.ncols {
                        self.rows[i][j] -= f * self.rows[row][j];
                    }
                    self.rows[i][col] = 0.0;
                }
            }
        }
        let f = self.obj[col];
        if f != 0.0 {
            for j in 0..=self.ncols {
                self.obj[j] -= f * self.rows[row][j];
            }
            self.obj[col] = 0.0;
        }
        self.basis[row] = col;
        self.iterations += 1;
    }

    /// Runs simplex iterations until optimal. `barred_from` marks the first
    /// column that may never enter the basis (artificials in phase 2).
    fn optimize(&mut self, barred_from: usize, max_iter: usize) -> Result<()> {
        while let Some(enter) = self.entering(barred_from) {
            if self.iterations >= max_iter {
                return Err(Error::MaxIterations(max_iter));
            }
            let Some(leave) = self.leaving(enter) else {
                return Err(Error::Unbounded(String::new()));
            };
            self.pivot(leave, enter);
            let obj = self.objective_value();
            if (self.last_objective - obj).abs() <= 1e-13 * (1.0 + obj.abs()) {
                self.stall += 1;
                if self.stall >= STALL_LIMIT {
                    self.bland = true;
                }
            } else {
                self.stall = 0;
                self.last_objective = obj;
            }
        }
        Ok(())
    }
}

/// Solve with the two-phase primal simplex method.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution> {
    let n_orig = p.n_vars();

    // Column layout: structural columns (split frees), then slacks and
    // surpluses, then artificials.
    let mut col_of: Vec<(usize, Option<usize>)> = Vec::with_capacity(n_orig);
    let mut ncols = 0usize;
    for b in &p.bounds {
        match b {
            VarBound::NonNeg => {
                col_of.push((ncols, None));
                ncols += 1;
            }
            VarBound::Free => {
                col_of.push((ncols, Some(ncols + 1)));
                ncols += 2;
            }
        }
    }
    let n_struct = ncols;
    let m = p.rows.len();
    let n_slack = p
        .rows
        .iter()
        .filter(|r| r.relation != Relation::Eq)
        .count();
    let slack_start = n_struct;
    let artificial_start = n_struct + n_slack;
    // Upper bound: one artificial per row.
    let total_cols = artificial_start + m;

    let mut rows = vec![vec![0.0; total_cols + 1]; m];
    let mut basis = vec![usize::MAX; m];
    let mut slack_idx = slack_start;
    let mut art_idx = artificial_start;

    for (i, row) in p.rows.iter().enumerate() {
        let flip = row.rhs < 0.0;
        let sign = if flip { -1.0 } else { 1.0 };
        for &(var, coef) in &row.coeffs {
            let (pos, neg) = col_of[var];
            rows[i][pos] += sign * coef;
            if let Some(neg) = neg {
                rows[i][neg] -= sign * coef;
            }
        }
        rows[i][total_cols] = sign * row.rhs;
        let relation = match (row.relation, flip) {
            (Relation::Eq, _) => Relation::Eq,
            (Relation::Le, false) | (Relation::Ge, true) => Relation::Le,
            (Relation::Ge, false) | (Relation::Le, true) => Relation::Ge,
        };
        match relation {
            Relation::Le => {
                rows[i][slack_idx] = 1.0;
                basis[i] = slack_idx;
                slack_idx += 1;
            }
            Relation::Ge => {
                rows[i][slack_idx] = -1.0;
                slack_idx += 1;
                rows[i][art_idx] = 1.0;
                basis[i] = art_idx;
                art_idx += 1;
            }
            Relation::Eq => {
                rows[i][art_idx] = 1.0;
                basis[i] = art_idx;
                art_idx += 1;
            }
        }
    }

    let mut t = Tableau {
        rows,
        obj: vec![0.0; total_cols + 1],
        basis,
        ncols: total_cols,
        artificial_start,
        iterations: 0,
        bland: false,
        stall: 0,
        last_objective: f64::INFINITY,
    };

    let max_iter = 200_000.min(2000 + 200 * (m + total_cols));

    // Phase 1: minimize the sum of artificials.
    if art_idx > artificial_start {
        let mut c1 = vec![0.0; total_cols];
        for c in c1.iter_mut().take(art_idx).skip(artificial_start) {
            *c = 1.0;
        }
        t.rebuild_objective(&c1);
        t.optimize(total_cols, max_iter)
            .map_err(|e| match e {
                // Phase 1 is bounded below by zero; surface iteration caps.
                Error::Unbounded(_) => Error::Infeasible("phase 1 unbounded".into()),
                other => other,
            })?;
        let infeasibility = t.objective_value();
        if infeasibility > LP_TOL {
            return Err(Error::Infeasible(format!(
                "artificial residual {infeasibility:.3e}"
            )));
        }
        // Drive artificials out of the basis where possible.
        for i in 0..m {
            if t.basis[i] >= artificial_start {
                if let Some(j) = (0..artificial_start)
                    .find(|&j| t.rows[i][j].abs() > LP_TOL)
                {
                    t.pivot(i, j);
                }
            }
        }
    }

    // Phase 2: the original objective over structural columns.
    let mut c2 = vec![0.0; total_cols];
    for (var, &(pos, neg)) in col_of.iter().enumerate() {
        c2[pos] = p.objective[var];
        if let Some(neg) = neg {
            c2[neg] = -p.objective[var];
        }
    }
    t.bland = false;
    t.stall = 0;
    t.last_objective = f64::INFINITY;
    t.rebuild_objective(&c2);
    t.optimize(t.artificial_start, max_iter)?;

    let mut x_std = vec![0.0; total_cols];
    for (i, &b) in t.basis.iter().enumerate() {
        if b < total_cols {
            x_std[b] = t.rhs(i);
        }
    }
    let x: Vec<f64> = col_of
        .iter()
        .map(|&(pos, neg)| x_std[pos] - neg.map_or(0.0, |n| x_std[n]))
        .collect();
    let objective = x
        .iter()
        .zip(&p.objective)
        .map(|(xi, ci)| xi * ci)
        .sum();
    Ok(LpSolution {
        x,
        objective,
        iterations: t.iterations,
    })
}
