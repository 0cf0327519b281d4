//! Portfolio selection by diversification-quotient minimization.
//!
//! The fractional objective
//!
//! ```text
//! v(w) = E[(w'(X - x_ex))+] / E[w'(x_ex - X)]
//! ```
//!
//! over the simplex is solved three ways, which cross-check each other:
//! an exact linear program (the Charnes-Cooper style homogenization of the
//! empirical problem), a frontier sweep over the expected cushion, and
//! projected gradient descent, which pseudo-convexity makes globally
//! convergent. Omega-ratio maximization reuses the same homogenization
//! machinery.

mod lp;

pub use lp::{solve_lp, LpProblem, LpRow, LpSolution, Relation, VarBound};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::risk::expectile_at;
use crate::sample::{LossSample, MeasureKind, RiskLevel};

/// Headroom factor of the automatic big-M policy.
const BIG_M_HEADROOM: f64 = 1e4;
/// Maximum automatic big-M doublings when the bound is active.
const BIG_M_MAX_DOUBLINGS: usize = 10;
/// Armijo sufficient-decrease constant.
const ARMIJO_C: f64 = 1e-4;
/// Armijo backtracking factor.
const ARMIJO_BACKTRACK: f64 = 0.5;
/// Gradient-descent iteration cap.
const GD_MAX_ITER: usize = 500;
/// Projected-gradient stopping norm.
const GD_STOP_TOL: f64 = 1e-8;
/// Kink half-width relative to the portfolio residual scale.
const KINK_TOL: f64 = 1e-12;

/// Nonnegative portfolio weights; a normalized view lives on the simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PortfolioWeights {
    w: Vec<f64>,
}

impl PortfolioWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::EmptySample);
        }
        for (i, &wi) in w.iter().enumerate() {
            if !wi.is_finite() || wi < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "weight {wi} at index {i} must be finite and nonnegative"
                )));
            }
        }
        Ok(PortfolioWeights { w })
    }

    pub fn equal(n: usize) -> Self {
        PortfolioWeights {
            w: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn sum(&self) -> f64 {
        self.w.iter().sum()
    }

    /// Rescaled onto the simplex; requires a positive total.
    pub fn normalized(&self) -> Result<PortfolioWeights> {
        let total = self.sum();
        if total <= 0.0 {
            return Err(Error::Degenerate(
                "cannot normalize weights with zero total".into(),
            ));
        }
        Ok(PortfolioWeights {
            w: self.w.iter().map(|wi| wi / total).collect(),
        })
    }
}

/// The empirical DQ objective for a fixed sample and level: residual matrix
/// `a_{ji} = X_i^{(j)} - ex_alpha(X_i)`, row weights, and the level.
pub(crate) struct DqObjective {
    n: usize,
    alpha: f64,
    a: Vec<f64>,
    row_weights: Vec<f64>,
    marginal_expectiles: Vec<f64>,
}

impl DqObjective {
    pub fn new(ls: &LossSample, level: &RiskLevel) -> Result<Self> {
        level.require_kind(MeasureKind::Expectile)?;
        level.require_lower_half()?;
        let n = ls.n_assets();
        let rows = ls.n_rows();
        let marginal_expectiles: Vec<f64> = (0..n)
            .map(|i| expectile_at(&ls.column(i), level.alpha()))
            .collect();
        let mut a = Vec::with_capacity(rows * n);
        for j in 0..rows {
            for i in 0..n {
                a.push(ls.value(j, i) - marginal_expectiles[i]);
            }
        }
        let row_weights = (0..rows).map(|j| ls.weight(j)).collect();
        Ok(DqObjective {
            n,
            alpha: level.alpha(),
            a,
            row_weights,
            marginal_expectiles,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.n
    }

    pub fn n_rows(&self) -> usize {
        self.row_weights.len()
    }

    fn residual_row(&self, j: usize) -> &[f64] {
        &self.a[j * self.n..(j + 1) * self.n]
    }

    fn portfolio_residual(&self, j: usize, w: &[f64]) -> f64 {
        self.residual_row(j)
            .iter()
            .zip(w)
            .map(|(aji, wi)| aji * wi)
            .sum()
    }

    /// Mean cushion per asset: `E[ex_alpha(X_i) - X_i] = -E[a_i]`.
    pub fn mean_cushions(&self) -> Vec<f64> {
        let mut mu = vec![0.0; self.n];
        for j in 0..self.n_rows() {
            let wj = self.row_weights[j];
            for (i, aji) in self.residual_row(j).iter().enumerate() {
                mu[i] -= wj * aji;
            }
        }
        mu
    }

    /// The DQ value of the portfolio `w` (scale invariant in `w`).
    pub fn value(&self, w: &[f64]) -> f64 {
        let mut upside = 0.0;
        let mut mean = 0.0;
        for j in 0..self.n_rows() {
            let z = self.portfolio_residual(j, w);
            let wj = self.row_weights[j];
            upside += wj * z.max(0.0);
            mean += wj * z;
        }
        let abs_dev = 2.0 * upside - mean;
        if abs_dev <= 0.0 {
            0.0
        } else {
            upside / (self.alpha * abs_dev)
        }
    }

    /// Analytic gradient of the DQ value with one-sided (upper) treatment
    /// of rows at the kink.
    pub fn gradient(&self, w: &[f64]) -> DqGradient {
        let rows = self.n_rows();
        let mut z = vec![0.0; rows];
        let mut scale: f64 = 1.0;
        for (j, zj) in z.iter_mut().enumerate() {
            *zj = self.portfolio_residual(j, w);
            scale = scale.max(zj.abs());
        }
        let tol = KINK_TOL * scale;
        let mut upside = 0.0;
        let mut mean = 0.0;
        let mut kink_mass = 0.0;
        let mut indicator_mean = vec![0.0; self.n];
        let mut column_mean = vec![0.0; self.n];
        for j in 0..rows {
            let wj = self.row_weights[j];
            let zj = z[j];
            mean += wj * zj;
            if zj > 0.0 {
                upside += wj * zj;
            }
            if zj.abs() <= tol {
                kink_mass += wj;
            }
            let include = zj >= -tol;
            for (i, aji) in self.residual_row(j).iter().enumerate() {
                column_mean[i] += wj * aji;
                if include {
                    indicator_mean[i] += wj * aji;
                }
            }
        }
        let abs_dev = 2.0 * upside - mean;
        let value = if abs_dev <= 0.0 {
            0.0
        } else {
            upside / (self.alpha * abs_dev)
        };
        let denom = self.alpha * abs_dev * abs_dev;
        let partials = if denom > 0.0 {
            (0..self.n)
                .map(|i| (upside * column_mean[i] - indicator_mean[i] * mean) / denom)
                .collect()
        } else {
            vec![0.0; self.n]
        };
        DqGradient {
            partials,
            kink_mass,
            value,
        }
    }
}

/// Gradient of the DQ objective at a point, with the sample mass sitting
/// exactly on the kink set.
#[derive(Debug, Clone)]
pub struct DqGradient {
    pub partials: Vec<f64>,
    /// Total row weight within the kink tolerance of `w'(X - x_ex) = 0`;
    /// above 1e-12 the gradient is one-sided.
    pub kink_mass: f64,
    /// The objective value at the same point.
    pub value: f64,
}

impl DqGradient {
    pub fn has_kink_warning(&self) -> bool {
        self.kink_mass > 1e-12
    }
}

/// Analytic gradient of `w -> DQ_ex(w . X)`; satisfies `grad . w = 0`.
pub fn dq_ex_gradient(
    ls: &LossSample,
    level: &RiskLevel,
    w: &PortfolioWeights,
) -> Result<DqGradient> {
    if w.len() != ls.n_assets() {
        return Err(Error::DimensionMismatch {
            expected: ls.n_assets(),
            actual: w.len(),
        });
    }
    Ok(DqObjective::new(ls, level)?.gradient(w.as_slice()))
}

/// Outcome of the exact LP solve, serialized for the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct LpOutcome {
    pub weights: PortfolioWeights,
    /// The homogenized LP objective v; the DQ value is `v/(alpha(2v+1))`.
    pub objective: f64,
    pub dq_value: f64,
    pub status: String,
    pub iterations: usize,
    pub big_m: f64,
    pub big_m_doublings: usize,
    /// Columns excluded for non-positive cushion (degenerate assets).
    pub dropped_assets: Vec<usize>,
}

/// Exact minimization of the empirical expectile DQ over the simplex via
/// the homogenized linear program.
///
/// `big_m` bounds the homogenization scale `v0 = 1/z`; when absent it is
/// set to `1e4 * n / mean cushion` and doubled (at most 10 times) whenever
/// the solved `v0` sits on the bound.
pub fn min_dq_ex_lp(
    ls: &LossSample,
    level: &RiskLevel,
    big_m: Option<f64>,
) -> Result<LpOutcome> {
    let ctx = DqObjective::new(ls, level)?;
    let mu = ctx.mean_cushions();
    let kept: Vec<usize> = (0..ctx.n_assets()).filter(|&i| mu[i] > 0.0).collect();
    let dropped: Vec<usize> = (0..ctx.n_assets()).filter(|&i| mu[i] <= 0.0).collect();
    if kept.is_empty() {
        return Err(Error::Infeasible(
            "every column has non-positive cushion (degenerate assets)".into(),
        ));
    }
    let k = kept.len();
    let rows = ctx.n_rows();
    let mean_mu: f64 = kept.iter().map(|&i| mu[i]).sum::<f64>() / k as f64;
    let mut m_bound = big_m.unwrap_or(BIG_M_HEADROOM * k as f64 / mean_mu);
    if !(m_bound.is_finite() && m_bound > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "big-M bound must be positive and finite, got {m_bound}"
        )));
    }

    // Column layout: w~ (k) | v0 | y~ (rows, free) | d~ (rows) | v.
    let idx_v0 = k;
    let idx_y = |j: usize| k + 1 + j;
    let idx_d = |j: usize| k + 1 + rows + j;
    let idx_v = k + 1 + 2 * rows;
    let n_vars = k + 1 + 2 * rows + 1;

    let mut doublings = 0usize;
    loop {
        let mut lp_rows = Vec::with_capacity(2 * rows + 4);
        // sum w~ = v0
        lp_rows.push(LpRow {
            coeffs: kept
                .iter()
                .enumerate()
                .map(|(c, _)| (c, 1.0))
                .chain(std::iter::once((idx_v0, -1.0)))
                .collect(),
            relation: Relation::Eq,
            rhs: 0.0,
        });
        // sum mu_i w~_i = 1
        lp_rows.push(LpRow {
            coeffs: kept
                .iter()
                .enumerate()
                .map(|(c, &i)| (c, mu[i]))
                .collect(),
            relation: Relation::Eq,
            rhs: 0.0 + 1.0,
        });
        // residual rows: sum_i a_ji w~_i - y~_j = 0
        for j in 0..rows {
            let row_a = ctx.residual_row(j);
            let mut coeffs: Vec<(usize, f64)> = kept
                .iter()
                .enumerate()
                .map(|(c, &i)| (c, row_a[i]))
                .collect();
            coeffs.push((idx_y(j), -1.0));
            lp_rows.push(LpRow {
                coeffs,
                relation: Relation::Eq,
                rhs: 0.0,
            });
        }
        // weighted sum of d~ equals v
        let mut v_row: Vec<(usize, f64)> = (0..rows)
            .map(|j| (idx_d(j), ctx.row_weights[j]))
            .collect();
        v_row.push((idx_v, -1.0));
        lp_rows.push(LpRow {
            coeffs: v_row,
            relation: Relation::Eq,
            rhs: 0.0,
        });
        // d~_j >= y~_j
        for j in 0..rows {
            lp_rows.push(LpRow {
                coeffs: vec![(idx_d(j), 1.0), (idx_y(j), -1.0)],
                relation: Relation::Ge,
                rhs: 0.0,
            });
        }
        // v0 <= M
        lp_rows.push(LpRow {
            coeffs: vec![(idx_v0, 1.0)],
            relation: Relation::Le,
            rhs: m_bound,
        });

        let mut objective = vec![0.0; n_vars];
        objective[idx_v] = 1.0;
        let mut bounds = vec![VarBound::NonNeg; n_vars];
        for j in 0..rows {
            bounds[idx_y(j)] = VarBound::Free;
        }
        let problem = LpProblem::new(objective, lp_rows, bounds)?;
        let solution = solve_lp(&problem)?;

        let v0 = solution.x[idx_v0];
        if v0 >= m_bound * (1.0 - 1e-6) {
            doublings += 1;
            if doublings > BIG_M_MAX_DOUBLINGS {
                return Err(Error::Unbounded(format!(
                    "homogenization bound still active after {BIG_M_MAX_DOUBLINGS} doublings (M = {m_bound:.3e})"
                )));
            }
            m_bound *= 2.0;
            continue;
        }
        if v0 <= 0.0 {
            return Err(Error::Infeasible("homogenization scale collapsed to zero".into()));
        }
        let mut w = vec![0.0; ctx.n_assets()];
        for (c, &i) in kept.iter().enumerate() {
            w[i] = (solution.x[c] / v0).max(0.0);
        }
        let total: f64 = w.iter().sum();
        for wi in w.iter_mut() {
            *wi /= total;
        }
        let v = solution.objective;
        let alpha = level.alpha();
        return Ok(LpOutcome {
            weights: PortfolioWeights::new(w)?,
            objective: v,
            dq_value: v / (alpha * (2.0 * v + 1.0)),
            status: "optimal".into(),
            iterations: solution.iterations,
            big_m: m_bound,
            big_m_doublings: doublings,
            dropped_assets: dropped,
        });
    }
}

/// One point of the cushion/upside frontier.
#[derive(Debug, Clone, Serialize)]
pub struct FrontierPoint {
    /// Expected cushion `E[w'(x_ex - X)]`.
    pub m: f64,
    /// Expected upside `E[(w'(X - x_ex))+]` at the optimal weights.
    pub upside: f64,
    pub weights: PortfolioWeights,
}

/// Frontier sweep outcome; the best point maximizes `m / upside`.
#[derive(Debug, Clone, Serialize)]
pub struct FrontierOutcome {
    pub best: FrontierPoint,
    pub frontier: Vec<FrontierPoint>,
    pub dq_value: f64,
    pub infeasible_grid_points: usize,
}

fn frontier_subproblem(
    ctx: &DqObjective,
    mu: &[f64],
    m: f64,
) -> Result<(f64, Vec<f64>, usize)> {
    let n = ctx.n_assets();
    let rows = ctx.n_rows();
    let idx_d = |j: usize| n + j;
    let mut lp_rows = Vec::with_capacity(rows + 2);
    lp_rows.push(LpRow {
        coeffs: (0..n).map(|i| (i, 1.0)).collect(),
        relation: Relation::Eq,
        rhs: 1.0,
    });
    lp_rows.push(LpRow {
        coeffs: (0..n).map(|i| (i, mu[i])).collect(),
        relation: Relation::Eq,
        rhs: m,
    });
    for j in 0..rows {
        let mut coeffs: Vec<(usize, f64)> = ctx
            .residual_row(j)
            .iter()
            .enumerate()
            .map(|(i, &aji)| (i, -aji))
            .collect();
        coeffs.push((idx_d(j), 1.0));
        lp_rows.push(LpRow {
            coeffs,
            relation: Relation::Ge,
            rhs: 0.0,
        });
    }
    let mut objective = vec![0.0; n + rows];
    for j in 0..rows {
        objective[idx_d(j)] = ctx.row_weights[j];
    }
    let problem = LpProblem::new(objective, lp_rows, vec![VarBound::NonNeg; n + rows])?;
    let solution = solve_lp(&problem)?;
    Ok((
        solution.objective,
        solution.x[..n].to_vec(),
        solution.iterations,
    ))
}

/// Frontier sweep: solve the cushion-constrained upside minimization on a
/// grid of cushion targets, then refine around the maximum-slope point.
///
/// The default grid is 40 log-spaced targets spanning `[0.05, 1] x` the
/// maximum attainable cushion; endpoints come from two auxiliary LPs.
/// Infeasible targets are skipped.
pub fn min_dq_ex_frontier(
    ls: &LossSample,
    level: &RiskLevel,
    m_grid: Option<&[f64]>,
) -> Result<FrontierOutcome> {
    let ctx = DqObjective::new(ls, level)?;
    let mu = ctx.mean_cushions();
    let n = ctx.n_assets();

    // Attainable cushion range over the simplex via two auxiliary LPs.
    let simplex_row = LpRow {
        coeffs: (0..n).map(|i| (i, 1.0)).collect(),
        relation: Relation::Eq,
        rhs: 1.0,
    };
    let min_lp = LpProblem::new(
        mu.clone(),
        vec![simplex_row.clone()],
        vec![VarBound::NonNeg; n],
    )?;
    let max_lp = LpProblem::new(
        mu.iter().map(|v| -v).collect(),
        vec![simplex_row],
        vec![VarBound::NonNeg; n],
    )?;
    let c_min = solve_lp(&min_lp)?.objective;
    let c_max = -solve_lp(&max_lp)?.objective;
    if c_max <= 0.0 {
        return Err(Error::Infeasible(
            "no portfolio attains a positive expected cushion".into(),
        ));
    }

    let grid: Vec<f64> = match m_grid {
        Some(g) => {
            if g.is_empty() || g.iter().any(|&m| !(m.is_finite() && m > 0.0)) {
                return Err(Error::InvalidParameter(
                    "cushion grid must be nonempty with positive entries".into(),
                ));
            }
            g.to_vec()
        }
        None => {
            let lo = (0.05 * c_max).max(if c_min > 0.0 { c_min } else { 0.05 * c_max });
            if (c_max - lo).abs() <= 1e-15 * c_max.abs() {
                vec![c_max]
            } else {
                (0..40)
                    .map(|k| lo * (c_max / lo).powf(k as f64 / 39.0))
                    .collect()
            }
        }
    };

    let mut frontier = Vec::new();
    let mut infeasible = 0usize;
    for &m in &grid {
        match frontier_subproblem(&ctx, &mu, m) {
            Ok((upside, w, _)) => frontier.push(FrontierPoint {
                m,
                upside,
                weights: PortfolioWeights::new(w)?,
            }),
            Err(Error::Infeasible(_)) => infeasible += 1,
            Err(e) => return Err(e),
        }
    }
    if frontier.is_empty() {
        return Err(Error::Infeasible(
            "every cushion target on the grid is unattainable".into(),
        ));
    }

    let slope = |p: &FrontierPoint| {
        if p.upside > 0.0 {
            p.m / p.upside
        } else {
            f64::INFINITY
        }
    };
    let mut best_idx = 0usize;
    for (i, p) in frontier.iter().enumerate() {
        if slope(p) > slope(&frontier[best_idx]) {
            best_idx = i;
        }
    }
    let mut best = frontier[best_idx].clone();

    // Golden-section refinement of the maximum-slope cushion between the
    // neighbors of the best grid point.
    if best.upside > 0.0 && frontier.len() > 1 {
        let lo = if best_idx > 0 {
            frontier[best_idx - 1].m
        } else {
            frontier[best_idx].m * 0.5
        };
        let hi = if best_idx + 1 < frontier.len() {
            frontier[best_idx + 1].m
        } else {
            frontier[best_idx].m
        };
        let phi = 0.5 * (3.0 - 5.0_f64.sqrt());
        let mut a = lo;
        let mut b = hi;
        let ratio_at = |m: f64| -> Option<FrontierPoint> {
            frontier_subproblem(&ctx, &mu, m)
                .ok()
                .map(|(upside, w, _)| FrontierPoint {
                    m,
                    upside,
                    weights: PortfolioWeights::new(w).expect("lp weights are nonnegative"),
                })
        };
        let mut x1 = a + phi * (b - a);
        let mut x2 = b - phi * (b - a);
        let mut p1 = ratio_at(x1);
        let mut p2 = ratio_at(x2);
        for _ in 0..60 {
            let s1 = p1.as_ref().map_or(f64::NEG_INFINITY, slope);
            let s2 = p2.as_ref().map_or(f64::NEG_INFINITY, slope);
            if s1 >= s2 {
                b = x2;
                x2 = x1;
                p2 = p1.take();
                x1 = a + phi * (b - a);
                p1 = ratio_at(x1);
            } else {
                a = x1;
                x1 = x2;
                p1 = p2.take();
                x2 = b - phi * (b - a);
                p2 = ratio_at(x2);
            }
            if (b - a).abs() <= 1e-12 * (1.0 + b.abs()) {
                break;
            }
        }
        for candidate in [p1, p2].into_iter().flatten() {
            if slope(&candidate) > slope(&best) {
                best = candidate;
            }
        }
    }

    let alpha = level.alpha();
    let dq_value = if best.upside <= 0.0 {
        0.0
    } else {
        best.upside / (alpha * (2.0 * best.upside + best.m))
    };
    Ok(FrontierOutcome {
        best,
        frontier,
        dq_value,
        infeasible_grid_points: infeasible,
    })
}

/// Outcome of Omega-ratio maximization.
#[derive(Debug, Clone, Serialize)]
pub struct OmegaOutcome {
    pub weights: PortfolioWeights,
    /// The achieved Omega ratio of the portfolio return at the threshold.
    pub omega: f64,
    pub status: String,
    pub iterations: usize,
}

/// Maximize the empirical Omega ratio of the portfolio return
/// `R = -w'X` at threshold `t` by the linear-fractional homogenization:
/// normalize the (linear) excess return to one and minimize the expected
/// shortfall below the threshold.
///
/// When no portfolio has positive expected excess return the ratio cannot
/// be homogenized; the solver falls back to maximizing expected excess
/// return, breaking ties by minimal downside.
pub fn max_omega_lp(ls: &LossSample, threshold: f64) -> Result<OmegaOutcome> {
    let n = ls.n_assets();
    let rows = ls.n_rows();
    // b_{ji} = r_{ji} - t, the per-asset excess return.
    let b: Vec<f64> = (0..rows)
        .flat_map(|j| {
            ls.row(j)
                .iter()
                .map(|x| -x - threshold)
                .collect::<Vec<_>>()
        })
        .collect();
    if b.iter().all(|&v| v >= 0.0) {
        return Err(Error::Degenerate(
            "no portfolio has downside at this threshold: Omega denominator is 0 everywhere"
                .into(),
        ));
    }
    let row_weights: Vec<f64> = (0..rows).map(|j| ls.weight(j)).collect();
    let excess_mean: Vec<f64> = (0..n)
        .map(|i| {
            (0..rows)
                .map(|j| row_weights[j] * b[j * n + i])
                .sum::<f64>()
        })
        .collect();
    let max_excess = excess_mean.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let omega_of = |w: &[f64]| -> f64 {
        let mut up = 0.0;
        let mut down = 0.0;
        for j in 0..rows {
            let excess: f64 = (0..n).map(|i| w[i] * b[j * n + i]).sum();
            if excess > 0.0 {
                up += row_weights[j] * excess;
            } else {
                down -= row_weights[j] * excess;
            }
        }
        if down > 0.0 {
            up / down
        } else if up > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    };

    if max_excess > 0.0 {
        // Primary homogenization: E[w~' b] = 1, minimize downside.
        let idx_d = |j: usize| n + j;
        let mut m_bound = BIG_M_HEADROOM * n as f64 / max_excess;
        let mut doublings = 0usize;
        loop {
            let mut lp_rows = Vec::with_capacity(rows + 2);
            lp_rows.push(LpRow {
                coeffs: (0..n).map(|i| (i, excess_mean[i])).collect(),
                relation: Relation::Eq,
                rhs: 1.0,
            });
            for j in 0..rows {
                let mut coeffs: Vec<(usize, f64)> =
                    (0..n).map(|i| (i, b[j * n + i])).collect();
                coeffs.push((idx_d(j), 1.0));
                lp_rows.push(LpRow {
                    coeffs,
                    relation: Relation::Ge,
                    rhs: 0.0,
                });
            }
            lp_rows.push(LpRow {
                coeffs: (0..n).map(|i| (i, 1.0)).collect(),
                relation: Relation::Le,
                rhs: m_bound,
            });
            let mut objective = vec![0.0; n + rows];
            for j in 0..rows {
                objective[idx_d(j)] = row_weights[j];
            }
            let problem =
                LpProblem::new(objective, lp_rows, vec![VarBound::NonNeg; n + rows])?;
            let solution = solve_lp(&problem)?;
            let scale: f64 = solution.x[..n].iter().sum();
            if scale >= m_bound * (1.0 - 1e-6) && doublings < BIG_M_MAX_DOUBLINGS {
                doublings += 1;
                m_bound *= 2.0;
                continue;
            }
            if scale <= 0.0 {
                return Err(Error::Infeasible(
                    "Omega homogenization collapsed to the zero portfolio".into(),
                ));
            }
            let w: Vec<f64> = solution.x[..n].iter().map(|v| (v / scale).max(0.0)).collect();
            let weights = PortfolioWeights::new(w)?.normalized()?;
            let omega = omega_of(weights.as_slice());
            return Ok(OmegaOutcome {
                weights,
                omega,
                status: "optimal".into(),
                iterations: solution.iterations,
            });
        }
    }

    // Fallback: maximize expected excess return, then minimize downside
    // among the maximizers.
    let simplex_row = LpRow {
        coeffs: (0..n).map(|i| (i, 1.0)).collect(),
        relation: Relation::Eq,
        rhs: 1.0,
    };
    let stage_a = LpProblem::new(
        excess_mean.iter().map(|v| -v).collect(),
        vec![simplex_row.clone()],
        vec![VarBound::NonNeg; n],
    )?;
    let best_excess = -solve_lp(&stage_a)?.objective;
    let idx_d = |j: usize| n + j;
    let mut lp_rows = vec![
        simplex_row,
        LpRow {
            coeffs: (0..n).map(|i| (i, excess_mean[i])).collect(),
            relation: Relation::Ge,
            rhs: best_excess - 1e-9 * (1.0 + best_excess.abs()),
        },
    ];
    for j in 0..rows {
        let mut coeffs: Vec<(usize, f64)> = (0..n).map(|i| (i, b[j * n + i])).collect();
        coeffs.push((idx_d(j), 1.0));
        lp_rows.push(LpRow {
            coeffs,
            relation: Relation::Ge,
            rhs: 0.0,
        });
    }
    let mut objective = vec![0.0; n + rows];
    for j in 0..rows {
        objective[idx_d(j)] = row_weights[j];
    }
    let problem = LpProblem::new(objective, lp_rows, vec![VarBound::NonNeg; n + rows])?;
    let solution = solve_lp(&problem)?;
    let weights = PortfolioWeights::new(solution.x[..n].to_vec())?.normalized()?;
    let omega = omega_of(weights.as_slice());
    Ok(OmegaOutcome {
        weights,
        omega,
        status: "fallback_max_excess_return".into(),
        iterations: solution.iterations,
    })
}

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut tau = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        acc += uk;
        let candidate = (acc - 1.0) / (k + 1) as f64;
        if uk - candidate > 0.0 {
            tau = candidate;
        }
    }
    v.iter().map(|&vi| (vi - tau).max(0.0)).collect()
}

/// Outcome of projected gradient descent on the simplex.
#[derive(Debug, Clone, Serialize)]
pub struct GradientDescentOutcome {
    pub weights: PortfolioWeights,
    /// The DQ value at the returned weights.
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Projected-gradient descent with Armijo backtracking on the simplex.
///
/// Pseudo-convexity of the objective on the open orthant makes stationary
/// points global minimizers, so the iterate matching the LP optimum is not
/// luck. Non-convergence within the iteration cap returns the best iterate
/// with `converged = false`.
pub fn min_dq_ex_gradient_descent(
    ls: &LossSample,
    level: &RiskLevel,
    start: &PortfolioWeights,
) -> Result<GradientDescentOutcome> {
    if start.len() != ls.n_assets() {
        return Err(Error::DimensionMismatch {
            expected: ls.n_assets(),
            actual: start.len(),
        });
    }
    if start.as_slice().iter().any(|&wi| wi <= 0.0) {
        return Err(Error::InvalidParameter(
            "gradient descent requires a strictly positive start".into(),
        ));
    }
    let ctx = DqObjective::new(ls, level)?;
    let mut w = project_simplex(start.as_slice());
    let mut f = ctx.value(&w);
    let mut best = (w.clone(), f);
    let mut converged = false;
    let mut iterations = 0usize;
    for _ in 0..GD_MAX_ITER {
        iterations += 1;
        let grad = ctx.gradient(&w);
        let g = &grad.partials;
        let probe = project_simplex(
            &w.iter().zip(g).map(|(wi, gi)| wi - gi).collect::<Vec<_>>(),
        );
        let pg_norm: f64 = probe
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if pg_norm <= GD_STOP_TOL {
            converged = true;
            break;
        }
        let mut eta = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = project_simplex(
                &w.iter()
                    .zip(g)
                    .map(|(wi, gi)| wi - eta * gi)
                    .collect::<Vec<_>>(),
            );
            let f_trial = ctx.value(&trial);
            let decrease: f64 = g
                .iter()
                .zip(trial.iter().zip(&w))
                .map(|(gi, (ti, wi))| gi * (ti - wi))
                .sum();
            if f_trial <= f + ARMIJO_C * decrease {
                w = trial;
                f = f_trial;
                accepted = true;
                break;
            }
            eta *= ARMIJO_BACKTRACK;
        }
        if f < best.1 {
            best = (w.clone(), f);
        }
        if !accepted {
            // No acceptable step: treat as (numerically) stationary.
            converged = pg_norm <= 1e3 * GD_STOP_TOL;
            break;
        }
    }
    Ok(GradientDescentOutcome {
        weights: PortfolioWeights::new(best.0)?,
        objective: best.1,
        converged,
        iterations,
    })
}

/// Both objective values and the directional derivative `grad f(w) . (v-w)`,
/// the quantities entering the pseudo-convexity inequality.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeRecord {
    pub f_w: f64,
    pub f_v: f64,
    pub directional: f64,
    pub kink_mass: f64,
}

pub fn pseudo_convexity_probe(
    ls: &LossSample,
    level: &RiskLevel,
    w: &PortfolioWeights,
    v: &PortfolioWeights,
) -> Result<ProbeRecord> {
    if w.len() != ls.n_assets() || v.len() != ls.n_assets() {
        return Err(Error::DimensionMismatch {
            expected: ls.n_assets(),
            actual: w.len().max(v.len()),
        });
    }
    let ctx = DqObjective::new(ls, level)?;
    let grad = ctx.gradient(w.as_slice());
    let directional: f64 = grad
        .partials
        .iter()
        .zip(v.as_slice().iter().zip(w.as_slice()))
        .map(|(gi, (vi, wi))| gi * (vi - wi))
        .sum();
    Ok(ProbeRecord {
        f_w: grad.value,
        f_v: ctx.value(v.as_slice()),
        directional,
        kink_mass: grad.kink_mass,
    })
}

/// The DQ value of a fixed portfolio, exposed for the CLI and tests.
pub fn dq_ex_of_portfolio(
    ls: &LossSample,
    level: &RiskLevel,
    w: &PortfolioWeights,
) -> Result<f64> {
    if w.len() != ls.n_assets() {
        return Err(Error::DimensionMismatch {
            expected: ls.n_assets(),
            actual: w.len(),
        });
    }
    Ok(DqObjective::new(ls, level)?.value(w.as_slice()))
}
