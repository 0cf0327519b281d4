//! Sample containers and risk-level tags shared by every module.
//!
//! A [`LossSample`] is the empirical joint law of a loss vector: an N x n
//! matrix of observations in loss units (positive = loss) with optional
//! per-row probability weights. A [`ScalarSample`] is the one-dimensional
//! case, typically a single column or the row-sum of a joint sample.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for "weights sum to one" validation.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Relative tolerance for treating weights as uniform.
const UNIFORM_TOL: f64 = 1e-12;

/// The risk-measure family a level belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Expectile,
    Var,
    Es,
}

impl MeasureKind {
    /// Short name used by the CLI and the measure registry.
    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::Expectile => "ex",
            MeasureKind::Var => "var",
            MeasureKind::Es => "es",
        }
    }

    /// Parse a measure name as used on the command line.
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "ex" | "expectile" => Ok(MeasureKind::Expectile),
            "var" => Ok(MeasureKind::Var),
            "es" => Ok(MeasureKind::Es),
            other => Err(Error::InvalidParameter(format!(
                "unknown risk measure `{other}` (expected ex, var or es)"
            ))),
        }
    }
}

/// A probability level in (0,1) tagged with the risk measure it applies to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskLevel {
    alpha: f64,
    kind: MeasureKind,
}

impl RiskLevel {
    pub fn new(alpha: f64, kind: MeasureKind) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
            return Err(Error::InvalidAlpha {
                alpha,
                band: "(0,1)",
                measure: kind.name(),
            });
        }
        Ok(RiskLevel { alpha, kind })
    }

    pub fn expectile(alpha: f64) -> Result<Self> {
        Self::new(alpha, MeasureKind::Expectile)
    }

    pub fn var(alpha: f64) -> Result<Self> {
        Self::new(alpha, MeasureKind::Var)
    }

    pub fn es(alpha: f64) -> Result<Self> {
        Self::new(alpha, MeasureKind::Es)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    /// The safe loading factor `(1 - 2 alpha) / alpha` of an expectile level.
    ///
    /// Positive exactly when `alpha < 1/2`, where the expectile sits above the
    /// mean by this multiple of the upper partial expectation.
    pub fn safe_loading(&self) -> f64 {
        (1.0 - 2.0 * self.alpha) / self.alpha
    }

    pub(crate) fn require_kind(&self, expected: MeasureKind) -> Result<()> {
        if self.kind == expected {
            Ok(())
        } else {
            Err(Error::MeasureMismatch {
                expected: expected.name(),
                found: self.kind.name(),
            })
        }
    }

    /// Checks `alpha` lies in `(0, 1/2)`, the band on which expectile-based
    /// DQ takes values in [0,1].
    pub(crate) fn require_lower_half(&self) -> Result<()> {
        if self.alpha < 0.5 {
            Ok(())
        } else {
            Err(Error::InvalidAlpha {
                alpha: self.alpha,
                band: "(0,1/2)",
                measure: self.kind.name(),
            })
        }
    }
}

fn validate_weights(weights: &[f64], n_rows: usize) -> Result<()> {
    if weights.len() != n_rows {
        return Err(Error::DimensionMismatch {
            expected: n_rows,
            actual: weights.len(),
        });
    }
    let mut sum = 0.0;
    for &w in weights {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidWeights { sum: f64::NAN });
        }
        sum += w;
    }
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL * n_rows.max(1) as f64 {
        return Err(Error::InvalidWeights { sum });
    }
    Ok(())
}

/// A weighted one-dimensional sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSample {
    values: Vec<f64>,
    /// `None` means uniform weights `1/N`.
    weights: Option<Vec<f64>>,
}

impl ScalarSample {
    /// Uniformly weighted sample.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        for (j, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { row: j, col: 0 });
            }
        }
        Ok(ScalarSample {
            values,
            weights: None,
        })
    }

    /// Sample with explicit nonnegative weights summing to one.
    pub fn weighted(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let s = Self::new(values)?;
        validate_weights(&weights, s.values.len())?;
        Ok(ScalarSample {
            values: s.values,
            weights: Some(weights),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weight(&self, j: usize) -> f64 {
        match &self.weights {
            Some(w) => w[j],
            None => 1.0 / self.values.len() as f64,
        }
    }

    /// Iterator over `(value, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let uniform = 1.0 / self.values.len() as f64;
        self.values.iter().enumerate().map(move |(j, &v)| {
            let w = match &self.weights {
                Some(ws) => ws[j],
                None => uniform,
            };
            (v, w)
        })
    }

    pub fn has_uniform_weights(&self) -> bool {
        match &self.weights {
            None => true,
            Some(ws) => {
                let u = 1.0 / ws.len() as f64;
                ws.iter().all(|&w| (w - u).abs() <= UNIFORM_TOL)
            }
        }
    }

    /// Weighted mean.
    pub fn mean(&self) -> f64 {
        self.iter().map(|(v, w)| v * w).sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Whether all observations coincide (a degenerate point mass).
    pub fn is_degenerate(&self) -> bool {
        self.min() == self.max()
    }

    /// The sample of `-X`, materialized.
    pub fn negated(&self) -> ScalarSample {
        ScalarSample {
            values: self.values.iter().map(|v| -v).collect(),
            weights: self.weights.clone(),
        }
    }
}

/// An N x n matrix of joint loss observations with optional row weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSample {
    /// Row-major N x n observations.
    obs: Vec<f64>,
    n_assets: usize,
    /// `None` means uniform weights `1/N`.
    weights: Option<Vec<f64>>,
    labels: Vec<String>,
}

impl LossSample {
    /// Build from row-major flat storage.
    pub fn from_flat(n_assets: usize, obs: Vec<f64>) -> Result<Self> {
        if n_assets == 0 || obs.is_empty() {
            return Err(Error::EmptySample);
        }
        if obs.len() % n_assets != 0 {
            return Err(Error::DimensionMismatch {
                expected: n_assets,
                actual: obs.len() % n_assets,
            });
        }
        for (idx, &v) in obs.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    row: idx / n_assets,
                    col: idx % n_assets,
                });
            }
        }
        let labels = (0..n_assets).map(|i| format!("X{}", i + 1)).collect();
        Ok(LossSample {
            obs,
            n_assets,
            weights: None,
            labels,
        })
    }

    /// Build from a list of observation rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptySample);
        }
        let n = rows[0].len();
        let mut obs = Vec::with_capacity(rows.len() * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: row.len(),
                });
            }
            obs.extend_from_slice(row);
        }
        Self::from_flat(n, obs)
    }

    /// Attach explicit row weights (nonnegative, summing to one).
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        validate_weights(&weights, self.n_rows())?;
        self.weights = Some(weights);
        Ok(self)
    }

    /// Attach asset labels.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_assets {
            return Err(Error::DimensionMismatch {
                expected: self.n_assets,
                actual: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.obs.len() / self.n_assets
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.obs[j * self.n_assets..(j + 1) * self.n_assets]
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.obs[row * self.n_assets + col]
    }

    pub fn weight(&self, j: usize) -> f64 {
        match &self.weights {
            Some(w) => w[j],
            None => 1.0 / self.n_rows() as f64,
        }
    }

    pub fn has_uniform_weights(&self) -> bool {
        match &self.weights {
            None => true,
            Some(ws) => {
                let u = 1.0 / ws.len() as f64;
                ws.iter().all(|&w| (w - u).abs() <= UNIFORM_TOL)
            }
        }
    }

    fn weights_clone(&self) -> Option<Vec<f64>> {
        self.weights.clone()
    }

    /// Column `i` as a scalar sample (copies the column).
    pub fn column(&self, i: usize) -> ScalarSample {
        let values = (0..self.n_rows()).map(|j| self.value(j, i)).collect();
        ScalarSample {
            values,
            weights: self.weights_clone(),
        }
    }

    /// The row-sum sample `S = X_1 + ... + X_n`.
    pub fn row_sums(&self) -> ScalarSample {
        let values = (0..self.n_rows())
            .map(|j| self.row(j).iter().sum())
            .collect();
        ScalarSample {
            values,
            weights: self.weights_clone(),
        }
    }

    /// The weighted row-sum sample `w^T X` for portfolio weights `w`.
    pub fn portfolio_losses(&self, w: &[f64]) -> Result<ScalarSample> {
        if w.len() != self.n_assets {
            return Err(Error::DimensionMismatch {
                expected: self.n_assets,
                actual: w.len(),
            });
        }
        let values = (0..self.n_rows())
            .map(|j| self.row(j).iter().zip(w).map(|(x, wi)| x * wi).sum())
            .collect();
        Ok(ScalarSample {
            values,
            weights: self.weights_clone(),
        })
    }

    /// The sample of `-X`, materialized explicitly.
    pub fn negated(&self) -> LossSample {
        LossSample {
            obs: self.obs.iter().map(|v| -v).collect(),
            n_assets: self.n_assets,
            weights: self.weights_clone(),
            labels: self.labels.clone(),
        }
    }

    /// Per-column shift `X + c`, used by invariance tests.
    pub fn shifted(&self, shifts: &[f64]) -> Result<LossSample> {
        if shifts.len() != self.n_assets {
            return Err(Error::DimensionMismatch {
                expected: self.n_assets,
                actual: shifts.len(),
            });
        }
        let mut obs = self.obs.clone();
        for j in 0..self.n_rows() {
            for i in 0..self.n_assets {
                obs[j * self.n_assets + i] += shifts[i];
            }
        }
        Ok(LossSample {
            obs,
            n_assets: self.n_assets,
            weights: self.weights_clone(),
            labels: self.labels.clone(),
        })
    }

    /// Uniform rescaling `lambda * X` with `lambda > 0`.
    pub fn scaled(&self, lambda: f64) -> Result<LossSample> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scale factor must be positive and finite, got {lambda}"
            )));
        }
        Ok(LossSample {
            obs: self.obs.iter().map(|v| v * lambda).collect(),
            n_assets: self.n_assets,
            weights: self.weights_clone(),
            labels: self.labels.clone(),
        })
    }
}
