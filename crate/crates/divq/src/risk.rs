//! Scalar risk-measure primitives on weighted empirical samples.
//!
//! The expectile of a loss X at level alpha is the unique t solving the
//! first-order condition
//!
//! ```text
//! (1 - alpha) E[(X - t)+] = alpha E[(X - t)-]
//! ```
//!
//! On a finite sample the left-hand side minus the right-hand side is a
//! strictly decreasing, piecewise-linear function of t, so a bracketed
//! bisection refined by Newton steps converges to machine precision. VaR and
//! ES use the empirical step quantile with the half-open interval convention
//! `alpha in ((N-k)/N, (N-k+1)/N]` mapping to the k-th order statistic.

use crate::error::{Error, Result};
use crate::sample::{MeasureKind, RiskLevel, ScalarSample};

/// Relative stopping tolerance of the expectile solver.
const EXPECTILE_TOL: f64 = 1e-12;
/// Iteration cap of the expectile solver.
const EXPECTILE_MAX_ITER: usize = 200;
/// Snap tolerance for `alpha * N` landing exactly on a quantile grid point.
const GRID_SNAP_TOL: f64 = 1e-9;

/// Weighted upper partial expectation `E[(X - t)+]`.
pub fn upper_partial_expectation(s: &ScalarSample, t: f64) -> f64 {
    s.iter().map(|(x, w)| w * (x - t).max(0.0)).sum()
}

/// Weighted lower partial expectation `E[(X - t)-] = E[(t - X)+]`.
pub fn lower_partial_expectation(s: &ScalarSample, t: f64) -> f64 {
    s.iter().map(|(x, w)| w * (t - x).max(0.0)).sum()
}

/// First-order condition `(1-a) E[(X-t)+] - a E[(X-t)-]`, strictly
/// decreasing in t on the support hull.
fn expectile_foc(s: &ScalarSample, alpha: f64, t: f64) -> f64 {
    let mut up = 0.0;
    let mut down = 0.0;
    for (x, w) in s.iter() {
        let d = x - t;
        if d > 0.0 {
            up += w * d;
        } else {
            down -= w * d;
        }
    }
    (1.0 - alpha) * up - alpha * down
}

/// One-sided slope of the first-order condition (a subgradient at kinks).
fn expectile_foc_slope(s: &ScalarSample, alpha: f64, t: f64) -> f64 {
    let mut p_above = 0.0;
    let mut p_below = 0.0;
    for (x, w) in s.iter() {
        if x > t {
            p_above += w;
        } else if x < t {
            p_below += w;
        }
    }
    -(1.0 - alpha) * p_above - alpha * p_below
}

/// Expectile solver on a raw level in (0,1); shared by the public entry
/// point and the DQ-level root finders that evaluate expectiles at interior
/// levels such as `c * alpha`.
pub(crate) fn expectile_at(s: &ScalarSample, alpha: f64) -> f64 {
    let mut lo = s.min();
    let mut hi = s.max();
    if lo == hi {
        return lo;
    }
    let scale = 1.0_f64.max(lo.abs()).max(hi.abs());
    let mut t = s.mean();
    for _ in 0..EXPECTILE_MAX_ITER {
        let g = expectile_foc(s, alpha, t);
        if g > 0.0 {
            lo = t;
        } else if g < 0.0 {
            hi = t;
        } else {
            return t;
        }
        if hi - lo <= EXPECTILE_TOL * scale {
            break;
        }
        let slope = expectile_foc_slope(s, alpha, t);
        let newton = if slope < 0.0 { t - g / slope } else { f64::NAN };
        t = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    0.5 * (lo + hi)
}

/// The alpha-expectile of a weighted sample.
pub fn expectile(s: &ScalarSample, level: &RiskLevel) -> Result<f64> {
    level.require_kind(MeasureKind::Expectile)?;
    Ok(expectile_at(s, level.alpha()))
}

fn ascending(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Index k (1-based) with `alpha in ((N-k)/N, (N-k+1)/N]`, snapping
/// `alpha * N` to the grid when within floating-point noise of an integer.
fn order_statistic_index(n: usize, alpha: f64) -> usize {
    let na = alpha * n as f64;
    let rounded = na.round();
    let ceil = if (na - rounded).abs() <= GRID_SNAP_TOL * na.max(1.0) {
        rounded
    } else {
        na.ceil()
    };
    let k = n as i64 - ceil as i64 + 1;
    k.clamp(1, n as i64) as usize
}

/// Empirical VaR: the order statistic `X^[k]` selected by the level.
///
/// Requires uniform weights; weighted quantiles are out of scope.
pub fn var_empirical(s: &ScalarSample, level: &RiskLevel) -> Result<f64> {
    level.require_kind(MeasureKind::Var)?;
    if !s.has_uniform_weights() {
        return Err(Error::NonUniformWeights {
            op: "var_empirical",
        });
    }
    let sorted = ascending(s.values());
    let k = order_statistic_index(sorted.len(), level.alpha());
    Ok(sorted[k - 1])
}

/// Exact piecewise integral of the step quantile: `(1/alpha) int_0^alpha
/// VaR_p dp` for values sorted in descending order.
pub(crate) fn es_from_sorted_desc(sorted_desc: &[f64], alpha: f64) -> f64 {
    let n = sorted_desc.len() as f64;
    let na = alpha * n;
    let rounded = na.round();
    let full = if (na - rounded).abs() <= GRID_SNAP_TOL * na.max(1.0) {
        rounded
    } else {
        na.floor()
    };
    let m = (full as usize).min(sorted_desc.len());
    let mut acc: f64 = sorted_desc[..m].iter().sum::<f64>() / n;
    if m < sorted_desc.len() {
        let partial = (alpha - m as f64 / n).max(0.0);
        acc += partial * sorted_desc[m];
    }
    acc / alpha
}

/// Empirical ES: the average of VaR over levels below alpha, integrated
/// exactly over the step quantile function.
pub fn es_empirical(s: &ScalarSample, level: &RiskLevel) -> Result<f64> {
    level.require_kind(MeasureKind::Es)?;
    if !s.has_uniform_weights() {
        return Err(Error::NonUniformWeights { op: "es_empirical" });
    }
    let mut sorted = ascending(s.values());
    sorted.reverse();
    Ok(es_from_sorted_desc(&sorted, level.alpha()))
}

/// The tilted distribution function whose (1-alpha)-quantile is the
/// alpha-expectile:
///
/// ```text
/// F~(y) = L(y) / (2 L(y) + E[S] - y),   L(y) = E[(S - y)-]
/// ```
///
/// For a degenerate sample at c the 0/0 case is resolved as a unit step:
/// 1 for y >= c and 0 otherwise.
pub fn tilted_cdf(s: &ScalarSample, y: f64) -> f64 {
    let lo = s.min();
    let hi = s.max();
    if lo == hi {
        return if y >= lo { 1.0 } else { 0.0 };
    }
    let l = lower_partial_expectation(s, y);
    let denom = 2.0 * l + s.mean() - y;
    (l / denom).clamp(0.0, 1.0)
}

/// Omega ratio `E[(R - t)+] / E[(R - t)-]` with the conventions 0/0 = 0 and
/// x/0 = +inf for x > 0.
pub fn omega_ratio(s: &ScalarSample, t: f64) -> f64 {
    let up = upper_partial_expectation(s, t);
    let down = lower_partial_expectation(s, t);
    if down > 0.0 {
        up / down
    } else if up > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// A scalar risk measure, the common face of the expectile/VaR/ES family.
///
/// Implementations are stateless; they are registered by name so the CLI and
/// the DQ/DR dispatchers can select one at runtime.
pub trait RiskMeasure: Sync {
    fn kind(&self) -> MeasureKind;

    fn name(&self) -> &'static str {
        self.kind().name()
    }

    /// The measure value on a weighted sample at the given level.
    fn value(&self, s: &ScalarSample, level: &RiskLevel) -> Result<f64>;
}

struct ExpectileMeasure;
struct VarMeasure;
struct EsMeasure;

impl RiskMeasure for ExpectileMeasure {
    fn kind(&self) -> MeasureKind {
        MeasureKind::Expectile
    }

    fn value(&self, s: &ScalarSample, level: &RiskLevel) -> Result<f64> {
        expectile(s, level)
    }
}

impl RiskMeasure for VarMeasure {
    fn kind(&self) -> MeasureKind {
        MeasureKind::Var
    }

    fn value(&self, s: &ScalarSample, level: &RiskLevel) -> Result<f64> {
        var_empirical(s, level)
    }
}

impl RiskMeasure for EsMeasure {
    fn kind(&self) -> MeasureKind {
        MeasureKind::Es
    }

    fn value(&self, s: &ScalarSample, level: &RiskLevel) -> Result<f64> {
        es_empirical(s, level)
    }
}

static EXPECTILE_MEASURE: ExpectileMeasure = ExpectileMeasure;
static VAR_MEASURE: VarMeasure = VarMeasure;
static ES_MEASURE: EsMeasure = EsMeasure;

/// The registered measure for a kind tag.
pub fn measure(kind: MeasureKind) -> &'static dyn RiskMeasure {
    match kind {
        MeasureKind::Expectile => &EXPECTILE_MEASURE,
        MeasureKind::Var => &VAR_MEASURE,
        MeasureKind::Es => &ES_MEASURE,
    }
}

/// Look a measure up by its CLI name (`ex`, `var`, `es`).
pub fn lookup_measure(name: &str) -> Result<&'static dyn RiskMeasure> {
    Ok(measure(MeasureKind::parse(name)?))
}

/// All registered measures.
pub fn all_measures() -> [&'static dyn RiskMeasure; 3] {
    [&EXPECTILE_MEASURE, &VAR_MEASURE, &ES_MEASURE]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform(values: &[f64]) -> ScalarSample {
        ScalarSample::new(values.to_vec()).unwrap()
    }

    /// Pure-bisection oracle for the expectile first-order condition, kept
    /// independent of the production solver (no Newton refinement).
    fn expectile_bisection_oracle(s: &ScalarSample, alpha: f64) -> f64 {
        let mut lo = s.min();
        let mut hi = s.max();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if expectile_foc(s, alpha, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn expectile_bernoulli_closed_form() {
        // Two-point law {1 w.p. 0.1, 0 w.p. 0.9}: (1-a)p / (a + p(1-2a)).
        let s = ScalarSample::weighted(vec![1.0, 0.0], vec![0.1, 0.9]).unwrap();
        let lv = RiskLevel::expectile(0.05).unwrap();
        let got = expectile(&s, &lv).unwrap();
        let want = 0.095 / 0.14;
        assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
    }

    #[test]
    fn expectile_constant_sample() {
        let s = uniform(&[3.5, 3.5, 3.5]);
        for a in [0.05, 0.25, 0.5, 0.9] {
            let lv = RiskLevel::expectile(a).unwrap();
            assert_eq!(expectile(&s, &lv).unwrap(), 3.5);
        }
    }

    #[test]
    fn expectile_four_point_frozen_oracle_value() {
        // {0,1,2,3} uniform at alpha = 0.25. The weighted first-order
        // condition solves exactly to 2: 0.75*E[(X-2)+] = 0.75*(1/4) and
        // 0.25*E[(X-2)-] = 0.25*(3/4).
        let s = uniform(&[0.0, 1.0, 2.0, 3.0]);
        let lv = RiskLevel::expectile(0.25).unwrap();
        let got = expectile(&s, &lv).unwrap();
        assert!((got - 2.0).abs() < 1e-12, "got {got}");
        let oracle = expectile_bisection_oracle(&s, 0.25);
        assert!((got - oracle).abs() < 1e-11);
    }

    #[test]
    fn expectile_matches_bisection_oracle_randomized() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(2..60);
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let s = uniform(&values);
            let alpha = rng.gen_range(0.02..0.98);
            let got = expectile_at(&s, alpha);
            let oracle = expectile_bisection_oracle(&s, alpha);
            assert!(
                (got - oracle).abs() <= 1e-10 * (1.0 + oracle.abs()),
                "alpha={alpha}: got {got}, oracle {oracle}"
            );
        }
    }

    #[test]
    fn expectile_half_is_mean_and_monotone() {
        let s = uniform(&[-2.0, 0.5, 1.0, 7.0]);
        let mid = expectile(&s, &RiskLevel::expectile(0.5).unwrap()).unwrap();
        assert!((mid - s.mean()).abs() < 1e-10);
        let e1 = expectile_at(&s, 0.05);
        let e2 = expectile_at(&s, 0.2);
        let e3 = expectile_at(&s, 0.45);
        assert!(e1 > e2 && e2 > e3, "{e1} {e2} {e3}");
    }

    #[test]
    fn expectile_safe_loading_identity() {
        let s = uniform(&[-1.0, 2.0, 3.0, 10.0, -4.0]);
        let lv = RiskLevel::expectile(0.1).unwrap();
        let ex = expectile(&s, &lv).unwrap();
        let rhs = s.mean() + lv.safe_loading() * upper_partial_expectation(&s, ex);
        let scale = s.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((ex - rhs).abs() <= 1e-9 * scale);
    }

    #[test]
    fn expectile_acceptance_set_identity() {
        // X in the acceptance set boundary: E[(X-t)+] / E[|X-t|] = alpha at
        // t = expectile.
        let s = uniform(&[0.3, -1.2, 4.0, 2.2]);
        for a in [0.05, 0.2, 0.4] {
            let t = expectile_at(&s, a);
            let up = upper_partial_expectation(&s, t);
            let total = up + lower_partial_expectation(&s, t);
            assert!((up / total - a).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn expectile_translation_and_homogeneity(
            values in proptest::collection::vec(-50.0f64..50.0, 2..40),
            alpha in 0.02f64..0.48,
            shift in -10.0f64..10.0,
            scale in 0.1f64..10.0,
        ) {
            let s = uniform(&values);
            let base = expectile_at(&s, alpha);
            let shifted = uniform(&values.iter().map(|v| v + shift).collect::<Vec<_>>());
            let scaled = uniform(&values.iter().map(|v| v * scale).collect::<Vec<_>>());
            let tol = 1e-9 * (1.0 + base.abs() + shift.abs());
            prop_assert!((expectile_at(&shifted, alpha) - (base + shift)).abs() < tol);
            prop_assert!((expectile_at(&scaled, alpha) - scale * base).abs() < 1e-9 * (1.0 + scale * base.abs()));
        }

        #[test]
        fn tilted_cdf_monotone(
            values in proptest::collection::vec(-20.0f64..20.0, 3..30),
            y1 in -15.0f64..15.0,
            dy in 0.01f64..5.0,
        ) {
            let s = uniform(&values);
            prop_assume!(!s.is_degenerate());
            let lo = s.min();
            let hi = s.max();
            let a = y1.clamp(lo, hi - 1e-9);
            let b = (a + dy).min(hi);
            prop_assume!(b > a + 1e-12 && b <= hi && a >= lo);
            prop_assert!(tilted_cdf(&s, a) < tilted_cdf(&s, b));
        }
    }

    #[test]
    fn expectile_subadditive_on_row_sums() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for _ in 0..100 {
            let n = rng.gen_range(3..40);
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| a[0] * 0.3 + rng.gen_range(-3.0..3.0)).collect();
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let alpha = rng.gen_range(0.02..0.5);
            let lhs = expectile_at(&uniform(&sum), alpha);
            let rhs = expectile_at(&uniform(&a), alpha) + expectile_at(&uniform(&b), alpha);
            assert!(lhs <= rhs + 1e-9, "alpha={alpha}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn var_order_statistic_rule() {
        let s = uniform(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let cases = [(0.1, 5.0), (0.3, 4.0), (0.2, 5.0), (0.9, 1.0)];
        for (a, want) in cases {
            let got = var_empirical(&s, &RiskLevel::var(a).unwrap()).unwrap();
            assert_eq!(got, want, "alpha={a}");
        }
        let c = uniform(&[2.0, 2.0, 2.0]);
        assert_eq!(var_empirical(&c, &RiskLevel::var(0.4).unwrap()).unwrap(), 2.0);
    }

    #[test]
    fn var_rejects_weighted_samples() {
        let s = ScalarSample::weighted(vec![1.0, 2.0], vec![0.7, 0.3]).unwrap();
        assert!(matches!(
            var_empirical(&s, &RiskLevel::var(0.2).unwrap()),
            Err(Error::NonUniformWeights { .. })
        ));
    }

    #[test]
    fn es_piecewise_integral() {
        let s = uniform(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let es02 = es_empirical(&s, &RiskLevel::es(0.2).unwrap()).unwrap();
        assert!((es02 - 5.0).abs() < 1e-12);
        let es04 = es_empirical(&s, &RiskLevel::es(0.4).unwrap()).unwrap();
        assert!((es04 - 4.5).abs() < 1e-12);
        // Mid-step value: alpha = 0.3 integrates the full top step plus half
        // of the second one: (0.2*5 + 0.1*4)/0.3.
        let es03 = es_empirical(&s, &RiskLevel::es(0.3).unwrap()).unwrap();
        assert!((es03 - 1.4 / 0.3).abs() < 1e-12);
        let c = uniform(&[7.0, 7.0]);
        assert_eq!(es_empirical(&c, &RiskLevel::es(0.13).unwrap()).unwrap(), 7.0);
    }

    #[test]
    fn es_dominates_var_and_decreases_in_alpha() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let values: Vec<f64> = (0..37).map(|_| rng.gen_range(-4.0..9.0)).collect();
        let s = uniform(&values);
        let mut prev = f64::INFINITY;
        for a in [0.05, 0.1, 0.25, 0.5, 0.75, 0.95] {
            let es = es_empirical(&s, &RiskLevel::es(a).unwrap()).unwrap();
            let var = var_empirical(&s, &RiskLevel::var(a).unwrap()).unwrap();
            assert!(es >= var - 1e-12, "alpha={a}");
            assert!(es <= prev + 1e-12, "alpha={a}");
            prev = es;
        }
    }

    #[test]
    fn upper_partial_expectation_examples() {
        let s1 = uniform(&[-1.0, 1.0]);
        assert!((upper_partial_expectation(&s1, 0.0) - 0.5).abs() < 1e-15);
        let s2 = ScalarSample::weighted(vec![0.0, 1.0], vec![0.9, 0.1]).unwrap();
        assert!((upper_partial_expectation(&s2, 0.5) - 0.05).abs() < 1e-15);
        let s3 = uniform(&[1.0, 2.0, 3.0]);
        assert!((upper_partial_expectation(&s3, 2.0) - 1.0 / 3.0).abs() < 1e-15);
        // Decreasing and convex in t, and E[(X-t)+] = E[X] - t + E[(X-t)-].
        let ts = [-2.0, 0.0, 1.5, 2.5, 4.0];
        for pair in ts.windows(2) {
            assert!(
                upper_partial_expectation(&s3, pair[0]) >= upper_partial_expectation(&s3, pair[1])
            );
        }
        for &t in &ts {
            let lhs = upper_partial_expectation(&s3, t);
            let rhs = s3.mean() - t + lower_partial_expectation(&s3, t);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn tilted_cdf_uniform_grid() {
        // S ~ U[-1,1] approximated by a dense grid; F~(0) should approach
        // (0+1)^2 / (2(0^2+1^2)) = 0.5.
        let m = 4001;
        let values: Vec<f64> = (0..m)
            .map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / m as f64)
            .collect();
        let s = uniform(&values);
        assert!((tilted_cdf(&s, 0.0) - 0.5).abs() < 1e-3);
        assert_eq!(tilted_cdf(&s, -2.0), 0.0);
        assert_eq!(tilted_cdf(&s, 2.0), 1.0);
    }

    #[test]
    fn tilted_cdf_inverts_expectile() {
        let s = uniform(&[0.4, -2.0, 3.3, 1.1, 0.0, 5.5]);
        for a in [0.05, 0.1, 0.25] {
            let ex = expectile_at(&s, a);
            assert!(
                (tilted_cdf(&s, ex) - (1.0 - a)).abs() < 1e-9,
                "alpha={a}"
            );
        }
    }

    #[test]
    fn tilted_cdf_degenerate_convention() {
        let s = uniform(&[2.0, 2.0]);
        assert_eq!(tilted_cdf(&s, 2.0), 1.0);
        assert_eq!(tilted_cdf(&s, 1.999), 0.0);
        assert_eq!(tilted_cdf(&s, 2.001), 1.0);
    }

    #[test]
    fn omega_ratio_conventions() {
        let sym = uniform(&[-1.0, 1.0]);
        assert!((omega_ratio(&sym, 0.0) - 1.0).abs() < 1e-15);
        let s = ScalarSample::weighted(vec![0.0, 1.0], vec![0.9, 0.1]).unwrap();
        assert_eq!(omega_ratio(&s, 1.0), 0.0);
        assert_eq!(omega_ratio(&s, -0.5), f64::INFINITY);
        let c = uniform(&[3.0, 3.0]);
        assert_eq!(omega_ratio(&c, 3.0), 0.0);
    }

    #[test]
    fn omega_ratio_at_expectile_threshold() {
        let s = uniform(&[0.1, -0.7, 2.0, 0.4, -1.5]);
        let a = 0.2;
        let t = expectile_at(&s, a);
        assert!((omega_ratio(&s, t) - a / (1.0 - a)).abs() < 1e-9);
    }

    #[test]
    fn measure_registry_dispatch() {
        let s = uniform(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let var = lookup_measure("var").unwrap();
        assert_eq!(
            var.value(&s, &RiskLevel::var(0.3).unwrap()).unwrap(),
            4.0
        );
        let ex = lookup_measure("ex").unwrap();
        assert_eq!(ex.name(), "ex");
        assert!(ex.value(&s, &RiskLevel::var(0.3).unwrap()).is_err());
        assert!(lookup_measure("cvar").is_err());
        assert_eq!(all_measures().len(), 3);
    }
}
