//! Dynamic generalized linear models: the evolve / moment-match /
//! forecast / update cycle for Bernoulli and Poisson observation models,
//! plus the conditionally normal DLM with discount stochastic volatility.

mod conjugate;
mod design;
mod filter;
mod moments;
mod spec;

pub use conjugate::{
    forecast_bernoulli, forecast_poisson, match_beta, match_gamma, posterior_predictor_moments,
    BetaBernoulli, NegBinomial,
};
pub use design::{
    build_design, seasonal_factor, seasonal_factor_at, seasonal_functional, Covariates,
};
pub use filter::{
    discount_innovation, dlm_step, evolve, linear_bayes_update, predictor_moments, StudentTForecast,
};
pub use moments::{ConjugateParams, Family, PredictorMoments, StateMoments, VolatilityState};
pub use spec::{Block, Link, ModelSpec};
