//! Closed-form diversification of iid Bernoulli loss pairs.
//!
//! For iid Bernoulli(p) losses the marginal expectile and, for a pair, the
//! adjusted levels of all three DQ families are available in closed form;
//! the VaR and ES branches are stated for p = 0.1. These serve as exact
//! oracles for the empirical engine, together with materializations of the
//! exact joint law as weighted and uniform samples.

use crate::error::{Error, Result};
use crate::sample::{LossSample, RiskLevel};

/// iid Bernoulli(p) loss model with n assets.
#[derive(Debug, Clone, Copy)]
pub struct BernoulliSpec {
    pub p: f64,
    pub n: usize,
}

/// Closed-form marginal expectile and adjusted levels for a Bernoulli pair.
#[derive(Debug, Clone, Copy)]
pub struct BernoulliOracle {
    /// Marginal expectile `(1-a) p / (a + p(1-2a))`.
    pub ex_marginal: f64,
    /// Adjusted level of the expectile-based DQ.
    pub alpha_star_ex: f64,
    /// Adjusted level of the VaR-based DQ; available for p = 0.1 only.
    pub alpha_star_var: Option<f64>,
    /// Adjusted level of the ES-based DQ; available for p = 0.1 only.
    pub alpha_star_es: Option<f64>,
}

impl BernoulliSpec {
    pub fn new(p: f64, n: usize) -> Result<Self> {
        if !(p.is_finite() && p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Bernoulli parameter p must lie in (0,1), got {p}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("asset count must be positive".into()));
        }
        Ok(BernoulliSpec { p, n })
    }

    /// Marginal expectile of a Bernoulli(p) loss.
    pub fn ex_marginal(&self, alpha: f64) -> f64 {
        let p = self.p;
        (1.0 - alpha) * p / (alpha + p * (1.0 - 2.0 * alpha))
    }

    /// Adjusted expectile level of the iid pair; branches at alpha = p.
    pub fn alpha_star_ex(&self, alpha: f64) -> f64 {
        let p = self.p;
        if alpha <= p {
            p * alpha / (1.0 - 2.0 * alpha * (1.0 - p))
        } else {
            (alpha - p + p * p - alpha * p * p)
                / (2.0 * p * alpha + 1.0 - 3.0 * p + 2.0 * p * p * (1.0 - alpha))
        }
    }

    fn is_p_point_one(&self) -> bool {
        (self.p - 0.1).abs() <= 1e-12
    }

    /// Adjusted VaR level of the p = 0.1 pair: `0.19 1{alpha > 0.1}`.
    pub fn alpha_star_var(&self, alpha: f64) -> Option<f64> {
        if !self.is_p_point_one() {
            return None;
        }
        Some(if alpha > 0.1 { 0.19 } else { 0.0 })
    }

    /// Adjusted ES level of the p = 0.1 pair:
    /// `alpha/(20-100 alpha)` on (0.1, 18/95], `alpha` above.
    pub fn alpha_star_es(&self, alpha: f64) -> Option<f64> {
        if !self.is_p_point_one() {
            return None;
        }
        Some(if alpha <= 0.1 {
            0.0
        } else if alpha <= 18.0 / 95.0 {
            alpha / (20.0 - 100.0 * alpha)
        } else {
            alpha
        })
    }

    /// The exact independent pair law as a weighted 4-point joint sample.
    pub fn pair_sample_weighted(&self) -> LossSample {
        let p = self.p;
        let q = 1.0 - p;
        let rows = vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ];
        LossSample::from_rows(&rows)
            .expect("static rows")
            .with_weights(vec![q * q, p * q, p * q, p * p])
            .expect("probabilities sum to one")
    }

    /// The exact pair law expanded to a uniformly weighted sample via
    /// integer multiplicities; requires p to be a small-denominator
    /// rational (p = a/q with q <= 1000).
    pub fn pair_sample_uniform(&self) -> Result<LossSample> {
        let mut denom = None;
        for q in 2..=1000usize {
            let a = (self.p * q as f64).round();
            if (self.p * q as f64 - a).abs() < 1e-9 && a >= 1.0 && (a as usize) < q {
                denom = Some((a as usize, q));
                break;
            }
        }
        let (a, q) = denom.ok_or_else(|| {
            Error::InvalidParameter(format!(
                "p = {} is not a rational with denominator <= 1000; cannot expand to a uniform sample",
                self.p
            ))
        })?;
        let b = q - a;
        let mut rows = Vec::with_capacity(q * q);
        let push = |rows: &mut Vec<Vec<f64>>, row: [f64; 2], count: usize| {
            for _ in 0..count {
                rows.push(row.to_vec());
            }
        };
        push(&mut rows, [0.0, 0.0], b * b);
        push(&mut rows, [0.0, 1.0], a * b);
        push(&mut rows, [1.0, 0.0], a * b);
        push(&mut rows, [1.0, 1.0], a * a);
        LossSample::from_rows(&rows)
    }
}

/// The closed-form oracle record for the Bernoulli pair at one level.
///
/// Errors when n differs from 2, where the adjusted-level displays do not
/// apply. The VaR/ES branches are exposed only for p = 0.1.
pub fn bernoulli_oracle(spec: &BernoulliSpec, level: &RiskLevel) -> Result<BernoulliOracle> {
    if spec.n != 2 {
        return Err(Error::InvalidParameter(format!(
            "closed forms are stated for the pair (n = 2), got n = {}",
            spec.n
        )));
    }
    let alpha = level.alpha();
    Ok(BernoulliOracle {
        ex_marginal: spec.ex_marginal(alpha),
        alpha_star_ex: spec.alpha_star_ex(alpha),
        alpha_star_var: spec.alpha_star_var(alpha),
        alpha_star_es: spec.alpha_star_es(alpha),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_at_reference_levels() {
        let spec = BernoulliSpec::new(0.1, 2).unwrap();
        let o = bernoulli_oracle(&spec, &RiskLevel::expectile(0.05).unwrap()).unwrap();
        assert!((o.ex_marginal - 0.095 / 0.14).abs() < 1e-12);
        assert!((o.alpha_star_ex - 0.005 / 0.91).abs() < 1e-12);
        assert_eq!(o.alpha_star_var, Some(0.0));
        assert_eq!(o.alpha_star_es, Some(0.0));

        let o = bernoulli_oracle(&spec, &RiskLevel::expectile(0.15).unwrap()).unwrap();
        assert_eq!(o.alpha_star_var, Some(0.19));
        assert!((o.alpha_star_es.unwrap() - 0.03).abs() < 1e-12);
        // alpha > p branch: (0.0585)/(0.747).
        assert!((o.alpha_star_ex - 0.0585 / 0.747).abs() < 1e-12);
    }

    #[test]
    fn branches_are_continuous_at_p() {
        let spec = BernoulliSpec::new(0.1, 2).unwrap();
        let below = spec.alpha_star_ex(0.1 - 1e-12);
        let above = spec.alpha_star_ex(0.1 + 1e-12);
        assert!((below - above).abs() < 1e-9);
    }

    #[test]
    fn var_es_branches_gated_on_p() {
        let spec = BernoulliSpec::new(0.2, 2).unwrap();
        let o = bernoulli_oracle(&spec, &RiskLevel::expectile(0.15).unwrap()).unwrap();
        assert!(o.alpha_star_var.is_none());
        assert!(o.alpha_star_es.is_none());
        assert!(o.alpha_star_ex > 0.0);
        let wide = BernoulliSpec::new(0.1, 3).unwrap();
        assert!(bernoulli_oracle(&wide, &RiskLevel::expectile(0.1).unwrap()).is_err());
    }

    #[test]
    fn pair_samples_realize_exact_law() {
        let spec = BernoulliSpec::new(0.1, 2).unwrap();
        let w = spec.pair_sample_weighted();
        assert_eq!(w.n_rows(), 4);
        assert!((w.column(0).mean() - 0.1).abs() < 1e-15);
        let u = spec.pair_sample_uniform().unwrap();
        assert_eq!(u.n_rows(), 100);
        assert!(u.has_uniform_weights());
        assert!((u.column(1).mean() - 0.1).abs() < 1e-12);
        // Both representations agree on the joint law of the sum.
        let sw: f64 = w.row_sums().iter().map(|(v, wt)| v * wt).sum();
        let su: f64 = u.row_sums().iter().map(|(v, wt)| v * wt).sum();
        assert!((sw - su).abs() < 1e-12);
        assert!(BernoulliSpec::new(1.0 / 1013.0, 2)
            .unwrap()
            .pair_sample_uniform()
            .is_err());
    }
}
