//! Closed forms for elliptical loss vectors.
//!
//! For X ~ E_n(mu, Sigma, tau) the diversification quotient based on
//! expectiles depends on the dispersion matrix only through
//!
//! ```text
//! k_Sigma = sum_i sigma_i / sqrt(sum_{ij} sigma_ij)  in [1, inf),
//! ```
//!
//! and on the standard marginal Y ~ E_1(0,1,tau):
//!
//! ```text
//! DQ = E[(Y - k ex_a(Y))+] / (a E[|Y - k ex_a(Y)|]).
//! ```
//!
//! Supported generators are the normal and Student-t families, the two with
//! closed-form partial expectations.

use statrs::distribution::{Continuous, ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::optimize::PortfolioWeights;
use crate::sample::{MeasureKind, RiskLevel};

const SQRT_TWO_PI: f64 = 2.506628274631000502415765284811;

/// Symmetry tolerance for dispersion matrices.
const SIGMA_SYM_TOL: f64 = 1e-12;

/// The standard marginal of an elliptical family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Generator {
    Normal,
    /// Student-t with nu > 1 degrees of freedom (finite mean).
    StudentT { nu: f64 },
}

impl Generator {
    fn validate(&self) -> Result<()> {
        match self {
            Generator::Normal => Ok(()),
            Generator::StudentT { nu } => {
                if nu.is_finite() && *nu > 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "student_t generator requires nu > 1, got {nu}"
                    )))
                }
            }
        }
    }

    /// Survival function P(Y > c).
    fn survival(&self, c: f64) -> f64 {
        match self {
            Generator::Normal => 0.5 * erfc(c / std::f64::consts::SQRT_2),
            Generator::StudentT { nu } => {
                let t = StudentsT::new(0.0, 1.0, *nu).expect("validated nu");
                1.0 - t.cdf(c)
            }
        }
    }

    /// Upper partial expectation E[(Y - c)+] in closed form.
    ///
    /// Normal: phi(c) - c (1 - Phi(c)). Student-t: f(c)(nu + c^2)/(nu - 1)
    /// - c (1 - F(c)).
    pub fn partial_expectation_above(&self, c: f64) -> f64 {
        match self {
            Generator::Normal => {
                let phi = (-0.5 * c * c).exp() / SQRT_TWO_PI;
                (phi - c * self.survival(c)).max(0.0)
            }
            Generator::StudentT { nu } => {
                let t = StudentsT::new(0.0, 1.0, *nu).expect("validated nu");
                let pdf = t.pdf(c);
                (pdf * (nu + c * c) / (nu - 1.0) - c * self.survival(c)).max(0.0)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Generator::Normal => "normal",
            Generator::StudentT { .. } => "student_t",
        }
    }
}

/// Expectile of the standard marginal Y ~ E_1(0,1,tau).
///
/// Solves `(1 - 2a) E[(Y - t)+] = a t` (the first-order condition for a
/// mean-zero variable) by bracketed bisection with Newton refinement.
pub fn standard_expectile(generator: Generator, level: &RiskLevel) -> Result<f64> {
    level.require_kind(MeasureKind::Expectile)?;
    generator.validate()?;
    let alpha = level.alpha();
    if alpha == 0.5 {
        return Ok(0.0);
    }
    let g = |t: f64| (1.0 - 2.0 * alpha) * generator.partial_expectation_above(t) - alpha * t;
    // g is strictly decreasing for every alpha in (0,1); expand a bracket.
    let mut lo = -1.0;
    let mut hi = 1.0;
    for _ in 0..200 {
        if g(lo) > 0.0 {
            break;
        }
        lo *= 2.0;
    }
    for _ in 0..200 {
        if g(hi) < 0.0 {
            break;
        }
        hi *= 2.0;
    }
    let mut t = 0.0;
    for _ in 0..200 {
        let gt = g(t);
        if gt > 0.0 {
            lo = t;
        } else if gt < 0.0 {
            hi = t;
        } else {
            return Ok(t);
        }
        if hi - lo <= 1e-13 * 1.0_f64.max(lo.abs()).max(hi.abs()) {
            break;
        }
        let slope = -(1.0 - 2.0 * alpha) * generator.survival(t) - alpha;
        let newton = t - gt / slope;
        t = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(0.5 * (lo + hi))
}

fn validate_sigma(sigma: &[Vec<f64>]) -> Result<usize> {
    let n = sigma.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty dispersion matrix".into()));
    }
    let mut scale = 0.0f64;
    for (i, row) in sigma.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: row.len(),
            });
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { row: i, col: j });
            }
            scale = scale.max(v.abs());
        }
        if row[i] < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "negative diagonal entry sigma[{i}][{i}] = {}",
                row[i]
            )));
        }
    }
    if scale == 0.0 {
        return Err(Error::InvalidParameter(
            "dispersion matrix must not be the zero matrix".into(),
        ));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (sigma[i][j] - sigma[j][i]).abs() > SIGMA_SYM_TOL * scale.max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "dispersion matrix asymmetric at ({i},{j})"
                )));
            }
        }
    }
    Ok(n)
}

/// The dispersion statistic `sum_i sigma_i / sqrt(1' Sigma 1)`; equals 1
/// exactly when Sigma has rank one (a comonotonic vector).
pub fn k_sigma(sigma: &[Vec<f64>]) -> Result<f64> {
    let n = validate_sigma(sigma)?;
    let total: f64 = sigma.iter().flat_map(|r| r.iter()).sum();
    if total <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "1' Sigma 1 = {total} must be positive"
        )));
    }
    let diag_sum: f64 = (0..n).map(|i| sigma[i][i].sqrt()).sum();
    Ok(diag_sum / total.sqrt())
}

/// Location, dispersion and radial generator of an elliptical loss vector.
#[derive(Debug, Clone)]
pub struct EllipticalSpec {
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub generator: Generator,
}

impl EllipticalSpec {
    pub fn new(mu: Vec<f64>, sigma: Vec<Vec<f64>>, generator: Generator) -> Result<Self> {
        let n = validate_sigma(&sigma)?;
        if mu.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: mu.len(),
            });
        }
        generator.validate()?;
        Ok(EllipticalSpec {
            mu,
            sigma,
            generator,
        })
    }

    /// Centered spec with identity dispersion.
    pub fn standard(n: usize, generator: Generator) -> Result<Self> {
        let sigma = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(vec![0.0; n], sigma, generator)
    }

    /// Centered spec with unit variances and common correlation r.
    pub fn equicorrelated(n: usize, r: f64, generator: Generator) -> Result<Self> {
        if n >= 2 && !(r > -1.0 / (n as f64 - 1.0) && r <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "equicorrelation r = {r} outside (-1/(n-1), 1] for n = {n}"
            )));
        }
        let sigma = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { r }).collect())
            .collect();
        Self::new(vec![0.0; n], sigma, generator)
    }

    pub fn n_assets(&self) -> usize {
        self.mu.len()
    }

    /// Marginal dispersions sqrt(sigma_ii).
    pub fn marginal_sigmas(&self) -> Vec<f64> {
        (0..self.n_assets())
            .map(|i| self.sigma[i][i].sqrt())
            .collect()
    }
}

/// Population DQ based on expectiles for an elliptical vector.
///
/// Independent of the location mu and decreasing in `k_Sigma`; equal to 1
/// exactly at `k_Sigma = 1`.
pub fn elliptical_dq_ex(spec: &EllipticalSpec, level: &RiskLevel) -> Result<f64> {
    level.require_kind(MeasureKind::Expectile)?;
    level.require_lower_half()?;
    let k = k_sigma(&spec.sigma)?;
    if (k - 1.0).abs() <= 1e-12 {
        return Ok(1.0);
    }
    let alpha = level.alpha();
    let e = standard_expectile(spec.generator, level)?;
    let c = k * e;
    let up = spec.generator.partial_expectation_above(c);
    Ok((up / (alpha * (2.0 * up + c))).clamp(0.0, 1.0))
}

/// Population diversification ratio `1 / k_Sigma` of a centered elliptical
/// vector; identical across the expectile, VaR and ES families.
pub fn elliptical_dr(spec: &EllipticalSpec) -> Result<f64> {
    if spec.mu.iter().any(|&m| m != 0.0) {
        return Err(Error::InvalidParameter(
            "the DR identity is stated for centered elliptical vectors (mu = 0)".into(),
        ));
    }
    Ok(1.0 / k_sigma(&spec.sigma)?)
}

/// Weights minimizing the elliptical DQ for every level in (0,1/2):
/// the maximizer of `w' sigma / sqrt(w' Sigma w)` over the simplex,
/// computed by the convex reformulation
///
/// ```text
/// minimize w' Sigma w  subject to  w' sigma = 1, w >= 0,
/// ```
///
/// then rescaled to the simplex. Projected gradient with Armijo
/// backtracking from the feasible equal-weight start.
pub fn elliptical_optimal_weights(spec: &EllipticalSpec) -> Result<PortfolioWeights> {
    let n = spec.n_assets();
    let sigmas = spec.marginal_sigmas();
    let sigma_sum: f64 = sigmas.iter().sum();
    if sigma_sum <= 0.0 {
        return Err(Error::InvalidParameter(
            "all marginal dispersions are zero: normalization infeasible".into(),
        ));
    }
    let quad = |w: &[f64]| -> f64 {
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += w[i] * spec.sigma[i][j] * w[j];
            }
        }
        q
    };
    let grad = |w: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| 2.0 * (0..n).map(|j| spec.sigma[i][j] * w[j]).sum::<f64>())
            .collect()
    };
    let mut w = vec![1.0 / sigma_sum; n];
    let mut q = quad(&w);
    for _ in 0..50_000 {
        let g = grad(&w);
        let pg: f64 = {
            let probe = project_weighted_simplex(
                &w.iter().zip(&g).map(|(wi, gi)| wi - gi).collect::<Vec<_>>(),
                &sigmas,
            );
            probe
                .iter()
                .zip(&w)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        };
        if pg <= 1e-10 {
            break;
        }
        let mut eta = 1.0;
        let mut accepted = false;
        for _ in 0..80 {
            let trial = project_weighted_simplex(
                &w.iter()
                    .zip(&g)
                    .map(|(wi, gi)| wi - eta * gi)
                    .collect::<Vec<_>>(),
                &sigmas,
            );
            let q_trial = quad(&trial);
            let decrease: f64 = g
                .iter()
                .zip(trial.iter().zip(&w))
                .map(|(gi, (ti, wi))| gi * (ti - wi))
                .sum();
            if q_trial <= q + 1e-4 * decrease {
                w = trial;
                q = q_trial;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let total: f64 = w.iter().sum();
    PortfolioWeights::new(w.iter().map(|wi| wi / total).collect())
}

/// Euclidean projection onto `{w >= 0, sigma' w = 1}` by bisection on the
/// multiplier of the equality constraint.
fn project_weighted_simplex(v: &[f64], sigma: &[f64]) -> Vec<f64> {
    let eval = |lambda: f64| -> f64 {
        v.iter()
            .zip(sigma)
            .map(|(vi, si)| si * (vi - lambda * si).max(0.0))
            .sum::<f64>()
            - 1.0
    };
    let mut lo = -1.0;
    let mut hi = 1.0;
    for _ in 0..200 {
        if eval(lo) > 0.0 {
            break;
        }
        lo *= 2.0;
    }
    for _ in 0..200 {
        if eval(hi) < 0.0 {
            break;
        }
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eval(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
    }
    let lambda = 0.5 * (lo + hi);
    v.iter()
        .zip(sigma)
        .map(|(vi, si)| (vi - lambda * si).max(0.0))
        .collect()
}
