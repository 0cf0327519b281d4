//! Parametric closed forms and synthetic samplers.
//!
//! Elliptical and multivariate-regularly-varying models admit explicit
//! diversification formulas that serve as population-level oracles for the
//! empirical engine; the Bernoulli pair has fully closed-form adjusted
//! levels. The sampler registry generates reproducible joint samples for
//! experiments.

mod bernoulli;
mod elliptical;
mod mrv;
mod sampler;

pub use bernoulli::{bernoulli_oracle, BernoulliOracle, BernoulliSpec};
pub use elliptical::{
    elliptical_dq_ex, elliptical_dr, elliptical_optimal_weights, k_sigma, standard_expectile,
    EllipticalSpec, Generator,
};
pub use mrv::{mrv_limit_dq, MrvSpec};
pub use sampler::{
    build_model, model_names, sample_model, EquicorrelatedNormal, IidPareto, IidT, ModelParams,
    MultivariateT, SyntheticModel,
};
