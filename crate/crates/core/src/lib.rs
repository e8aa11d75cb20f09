//! Sequential Bayesian analysis of non-negative count time series.
//!
//! The model class couples a logistic (Bernoulli) dynamic generalized linear
//! model for the zero/non-zero outcome with a log-linear shifted-Poisson DGLM
//! for the positive part, optionally inflated by a time-specific random
//! effect for over-dispersion. Filtering is conjugate/linear-Bayes and runs
//! in constant time per observation, so many series can be processed in
//! parallel. A separate aggregate-level normal DLM can feed Monte Carlo draws
//! of a shared latent factor (e.g. a day-of-week effect) into the per-series
//! models, which recouple by mixture-collapsing over the factor draws.
//!
//! The crate is `no_std` (with `alloc`); all IO, file formats and the batch
//! CLI live in the companion `dcmm-cli` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dcmm;
pub mod dglm;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod multiscale;
pub mod special;

pub use error::{Error, Result};
