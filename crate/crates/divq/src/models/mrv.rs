//! Limiting diversification of multivariate regularly varying losses.
//!
//! As the level tends to zero, the expectile-based DQ of a vector with tail
//! index gamma and spectral measure Psi converges to
//!
//! ```text
//! eta_1 * (sum_i eta_{e_i}^{1/gamma})^{-gamma},
//! eta_x = int (x's)+^gamma Psi(ds),
//! ```
//!
//! which for iid regularly varying components equals n^(1-gamma).

use crate::error::{Error, Result};

/// A discrete spectral measure: weighted atoms on the L1 unit sphere.
#[derive(Debug, Clone)]
pub struct MrvSpec {
    pub gamma: f64,
    /// `(atom, weight)` pairs; atoms have unit L1 norm and weights sum to 1.
    pub spectrum: Vec<(Vec<f64>, f64)>,
}

impl MrvSpec {
    pub fn new(gamma: f64, spectrum: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tail index gamma must exceed 1, got {gamma}"
            )));
        }
        if spectrum.is_empty() {
            return Err(Error::InvalidParameter("empty spectral measure".into()));
        }
        let n = spectrum[0].0.len();
        let mut weight_sum = 0.0;
        for (atom, weight) in &spectrum {
            if atom.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: atom.len(),
                });
            }
            if !weight.is_finite() || *weight < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "spectral weight {weight} must be nonnegative"
                )));
            }
            let norm: f64 = atom.iter().map(|v| v.abs()).sum();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidParameter(format!(
                    "spectral atom has L1 norm {norm}, expected 1"
                )));
            }
            weight_sum += weight;
        }
        if (weight_sum - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidWeights { sum: weight_sum });
        }
        Ok(MrvSpec { gamma, spectrum })
    }

    /// The iid-like spectrum: one atom per coordinate direction.
    pub fn coordinate_atoms(n: usize, gamma: f64) -> Result<Self> {
        let spectrum = (0..n)
            .map(|i| {
                let mut atom = vec![0.0; n];
                atom[i] = 1.0;
                (atom, 1.0 / n as f64)
            })
            .collect();
        Self::new(gamma, spectrum)
    }

    pub fn n_assets(&self) -> usize {
        self.spectrum[0].0.len()
    }

    /// `eta_x = sum_atoms weight * (x' s)+^gamma`.
    pub fn eta(&self, x: &[f64]) -> f64 {
        self.spectrum
            .iter()
            .map(|(atom, weight)| {
                let dot: f64 = x.iter().zip(atom).map(|(a, b)| a * b).sum();
                weight * dot.max(0.0).powf(self.gamma)
            })
            .sum()
    }
}

/// The small-level limit of the expectile-based DQ under the MRV model.
pub fn mrv_limit_dq(spec: &MrvSpec) -> Result<f64> {
    let n = spec.n_assets();
    let eta_one = spec.eta(&vec![1.0; n]);
    let mut basis_sum = 0.0;
    let mut any_positive = false;
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let eta_i = spec.eta(&e);
        if eta_i > 0.0 {
            any_positive = true;
        }
        basis_sum += eta_i.powf(1.0 / spec.gamma);
    }
    if !any_positive {
        return Err(Error::Degenerate(
            "every coordinate eta vanishes: spectrum has no positive mass on any axis".into(),
        ));
    }
    Ok(eta_one * basis_sum.powf(-spec.gamma))
}
