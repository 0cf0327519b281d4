//! Diversification analytics built on expectiles, VaR and ES.
//!
//! The crate computes diversification quotients (DQ) of joint loss samples
//! and parametric models, selects optimally diversified portfolios by linear
//! and convex programming, and evaluates strategies in a rolling-window
//! backtest harness.
//!
//! Modules:
//! - [`sample`]: weighted empirical samples and risk-level tags.
//! - [`risk`]: scalar risk primitives (expectile, VaR, ES, tilted CDF,
//!   Omega ratio) behind a common [`risk::RiskMeasure`] trait.
//! - [`dq`]: diversification quotients and ratios on joint samples.
//! - [`models`]: elliptical / regularly-varying / Bernoulli closed forms
//!   and synthetic samplers.
//! - [`optimize`]: DQ-minimizing portfolio selection (LP, frontier sweep,
//!   projected gradient) and Omega-ratio maximization.
//! - [`backtest`]: CSV ingestion, rolling DQ series, strategy backtests.

pub mod backtest;
pub mod dq;
pub mod error;
pub mod models;
pub mod optimize;
pub mod risk;
pub mod sample;

pub use error::{Error, Result};
pub use sample::{LossSample, MeasureKind, RiskLevel, ScalarSample};
