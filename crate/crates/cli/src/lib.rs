//! Batch driver for sequential count-series forecasting: data ingestion,
//! model construction from JSON configuration, fitting, Monte Carlo
//! forecasting, probabilistic evaluation, synthetic data generation, and
//! the multi-scale shared-factor experiment. Every command is a plain
//! function so integration tests can call them without spawning the
//! binary.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod data;
pub mod errors;
pub mod model;
