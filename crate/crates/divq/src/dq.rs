//! Diversification quotients and ratios on joint loss samples.
//!
//! The diversification quotient at level alpha is `alpha* / alpha`, where
//! `alpha*` is the smallest risk level at which the aggregate risk measure
//! falls below the sum of the marginal risk measures at level alpha. For
//! expectiles this reduces to the closed form
//!
//! ```text
//! DQ = (1/alpha) E[(S - t)+] / E[|S - t|],
//! S = sum of columns, t = sum of marginal alpha-expectiles,
//! ```
//!
//! with an equivalent evaluation through the tilted CDF of S. For VaR the
//! empirical `alpha*` is an exact counting rule; for ES it is found by
//! inverting the strictly decreasing empirical ES in the level.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::risk::{
    es_from_sorted_desc, expectile_at, lower_partial_expectation, measure, omega_ratio,
    tilted_cdf, upper_partial_expectation,
};
use crate::sample::{LossSample, MeasureKind, RiskLevel, ScalarSample};

/// Bisection floor for the ES level search.
const ES_LEVEL_EPS: f64 = 1e-9;
/// Absolute bisection tolerance on the ES level.
const ES_LEVEL_TOL: f64 = 1e-12;

/// Sum of marginal risk-measure values, one per column.
fn marginal_risks(ls: &LossSample, level: &RiskLevel) -> Result<Vec<f64>> {
    let m = measure(level.kind());
    (0..ls.n_assets())
        .map(|i| m.value(&ls.column(i), level))
        .collect()
}

/// DQ based on expectiles via the partial-expectation formula.
///
/// Returns a value in [0,1]; exactly 0 when every row sum is at most the
/// pooled marginal capital `t` (no insolvency risk with pooled individual
/// capital), including the degenerate case `S = t`.
pub fn dq_ex(ls: &LossSample, level: &RiskLevel) -> Result<f64> {
    level.require_kind(MeasureKind::Expectile)?;
    level.require_lower_half()?;
    let alpha = level.alpha();
    let t: f64 = (0..ls.n_assets())
        .map(|i| expectile_at(&ls.column(i), alpha))
        .sum();
    let s = ls.row_sums();
    let up = upper_partial_expectation(&s, t);
    let abs_dev = up + lower_partial_expectation(&s, t);
    if abs_dev == 0.0 {
        return Ok(0.0);
    }
    Ok((up / (alpha * abs_dev)).clamp(0.0, 1.0))
}

/// DQ based on expectiles via the tilted CDF of the row sum; agrees with
/// [`dq_ex`] and serves as a standing cross-check of the two routes.
pub fn dq_ex_tilted(ls: &LossSample, level: &RiskLevel) -> Result<f64> {
    level.require_kind(MeasureKind::Expectile)?;
    level.require_lower_half()?;
    let alpha = level.alpha();
    let t: f64 = (0..ls.n_assets())
        .map(|i| expectile_at(&ls.column(i), alpha))
        .sum();
    let s = ls.row_sums();
    if s.is_degenerate() {
        // A constant row sum never exceeds the pooled marginal capital.
        return Ok(0.0);
    }
    Ok(((1.0 - tilted_cdf(&s, t)) / alpha).clamp(0.0, 1.0))
}

/// DQ based on VaR: `alpha* = m/N` where m counts rows whose sum exceeds
/// the pooled marginal VaR. May exceed 1 since VaR is not subadditive.
pub fn dq_var(ls: &LossSample, level: &RiskLevel) -> Result<f64> {
    level.require_kind(MeasureKind::Var)?;
    let risks = marginal_risks(ls, level)?;
    let t: f64 = risks.iter().sum();
    let n = ls.n_rows();
    let m = (0..n)
        .filter(|&j| ls.row(j).iter().sum::<f64>() > t)
        .count();
    Ok(m as f64 / (n as f64 * level.alpha()))
}

/// DQ based on ES: `alpha*` inverts the empirical ES of the row sum at the
/// pooled marginal ES. The empirical ES is continuous and strictly
/// decreasing below the top plateau, so bisection converges; the top-step
/// case (threshold at or above the sample maximum) yields exactly 0.
pub fn dq_es(ls: &LossSample, level: &RiskLevel) -> Result<f64> {
    level.require_kind(MeasureKind::Es)?;
    let risks = marginal_risks(ls, level)?;
    let t: f64 = risks.iter().sum();
    let s = ls.row_sums();
    let mut sorted: Vec<f64> = s.values().to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    if sorted[0] <= t {
        // ES_beta <= max(S) <= t for every beta: the infimum set is all of
        // (0,1).
        return Ok(0.0);
    }
    let mut lo = ES_LEVEL_EPS;
    let mut hi = 1.0 - ES_LEVEL_EPS;
    if es_from_sorted_desc(&sorted, hi) > t {
        // ES stays above t on the whole band; empty infimum set.
        return Ok(1.0 / level.alpha());
    }
    while hi - lo > ES_LEVEL_TOL {
        let mid = 0.5 * (lo + hi);
        if es_from_sorted_desc(&sorted, mid) > t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi) / level.alpha())
}

/// Diversification quotient for the measure named by the level's kind tag.
pub fn dq(ls: &LossSample, level: &RiskLevel) -> Result<f64> {
    match level.kind() {
        MeasureKind::Expectile => dq_ex(ls, level),
        MeasureKind::Var => dq_var(ls, level),
        MeasureKind::Es => dq_es(ls, level),
    }
}

/// Diversification ratio: aggregate risk over the sum of marginal risks,
/// with the conventions 0/0 = 0 and x/0 = +inf for x > 0.
pub fn dr(ls: &LossSample, level: &RiskLevel) -> Result<f64> {
    let m = measure(level.kind());
    let marginal_sum: f64 = marginal_risks(ls, level)?.iter().sum();
    let aggregate = m.value(&ls.row_sums(), level)?;
    if marginal_sum != 0.0 {
        Ok(aggregate / marginal_sum)
    } else if aggregate == 0.0 {
        Ok(0.0)
    } else {
        Ok(aggregate.signum() * f64::INFINITY)
    }
}

/// The adjustment factor c in (0,1] solving
/// `ex_{c alpha}(S) = sum_i ex_alpha(X_i)` by monotone root-finding on the
/// level. Equals [`dq_ex`] whenever the latter is positive.
pub fn adjusted_level(ls: &LossSample, level: &RiskLevel) -> Result<f64> {
    level.require_kind(MeasureKind::Expectile)?;
    level.require_lower_half()?;
    let alpha = level.alpha();
    let t: f64 = (0..ls.n_assets())
        .map(|i| expectile_at(&ls.column(i), alpha))
        .sum();
    let s = ls.row_sums();
    if s.max() <= t {
        return Err(Error::Degenerate(
            "dq_ex is 0: no adjusted level in (0,1] solves the level equation".into(),
        ));
    }
    // ex_beta(S) is continuous and strictly decreasing in beta for
    // non-degenerate S, with ex_beta(S) > t as beta -> 0 and
    // ex_alpha(S) <= t by coherence. Bracket then bisect.
    let mut hi = alpha;
    let mut lo = alpha / 2.0;
    for _ in 0..200 {
        if expectile_at(&s, lo) > t {
            break;
        }
        hi = lo;
        lo /= 2.0;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-14 * alpha {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if expectile_at(&s, mid) > t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi) / alpha)
}

/// DQ based on expectiles for levels in (1/2, 1), computed through the
/// symmetry identity
///
/// ```text
/// alpha' DQ_{alpha'}(X) + (1 - alpha') DQ_{1-alpha'}(-X) = 1,
/// ```
///
/// applied at `alpha' = 1 - alpha` to the explicitly negated sample. Values
/// may exceed 1 on this band (up to 1/alpha when the infimum set is empty).
pub fn dq_ex_upper_half(ls: &LossSample, level: &RiskLevel) -> Result<f64> {
    level.require_kind(MeasureKind::Expectile)?;
    let alpha = level.alpha();
    if alpha <= 0.5 {
        return Err(Error::InvalidAlpha {
            alpha,
            band: "(1/2,1)",
            measure: "ex",
        });
    }
    let degenerate = (0..ls.n_assets()).all(|i| ls.column(i).is_degenerate());
    if degenerate {
        return Err(Error::Degenerate(
            "symmetry identity requires a non-degenerate sample".into(),
        ));
    }
    let lower = RiskLevel::expectile(1.0 - alpha)?;
    let dq_neg = dq_ex(&ls.negated(), &lower)?;
    Ok((1.0 - (1.0 - alpha) * dq_neg) / alpha)
}

/// The full diversification bundle for one sample and level.
///
/// `dq_var` and `dq_es` are `None` for samples with non-uniform weights,
/// where the empirical step quantile is not defined.
#[derive(Debug, Clone, Serialize)]
pub struct DqReport {
    pub dq_ex: f64,
    pub dq_var: Option<f64>,
    pub dq_es: Option<f64>,
    /// Expectile-based diversification ratio.
    pub dr: f64,
    /// Omega ratio of the row sum at the pooled marginal threshold.
    pub omega_at_t: f64,
    /// The adjusted aggregate level `alpha* = alpha * dq_ex` (0 when
    /// `dq_ex` is 0).
    pub adjusted_level: f64,
    pub alpha: f64,
    /// Marginal alpha-expectiles, one per column.
    pub marginal_risks: Vec<f64>,
    /// The pooled marginal capital `t`, the sum of `marginal_risks`.
    pub aggregate_threshold: f64,
}

impl DqReport {
    /// Computes every index at an expectile level in (0, 1/2).
    pub fn compute(ls: &LossSample, level: &RiskLevel) -> Result<Self> {
        level.require_kind(MeasureKind::Expectile)?;
        level.require_lower_half()?;
        let alpha = level.alpha();
        let risks: Vec<f64> = (0..ls.n_assets())
            .map(|i| expectile_at(&ls.column(i), alpha))
            .collect();
        let t: f64 = risks.iter().sum();
        let value = dq_ex(ls, level)?;
        let (var, es) = if ls.has_uniform_weights() {
            (
                Some(dq_var(ls, &RiskLevel::var(alpha)?)?),
                Some(dq_es(ls, &RiskLevel::es(alpha)?)?),
            )
        } else {
            (None, None)
        };
        let s = ls.row_sums();
        Ok(DqReport {
            dq_ex: value,
            dq_var: var,
            dq_es: es,
            dr: dr(ls, level)?,
            omega_at_t: omega_ratio(&s, t),
            adjusted_level: alpha * value,
            alpha,
            marginal_risks: risks,
            aggregate_threshold: t,
        })
    }
}
