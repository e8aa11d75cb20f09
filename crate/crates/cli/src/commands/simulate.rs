//! `simulate`: synthetic multi-series count data from a ground-truth
//! generator with a shared weekly factor, for end-to-end exercises and
//! recovery checks.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use dcmm_core::special::{stream_id_for, Dist, RngStream};
use serde::{Deserialize, Serialize};

use crate::commands::ensure_out_dir;
use crate::data::{write_series_table, SeriesData, SeriesTable};
use crate::errors::{CliError, Result};

/// Generator settings. Every series draws its own base rate, zero
/// propensity, and loading on one shared day-of-week factor; the factor
/// itself drifts slowly by a random walk on the weekday effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "d_n_series")]
    pub n_series: usize,
    #[serde(default = "d_days")]
    pub days: usize,
    #[serde(default = "d_start")]
    pub start_date: NaiveDate,
    #[serde(default)]
    pub seed: u64,
    /// Range of per-series `ln` base rates for the positive part.
    #[serde(default = "d_base_log_rate")]
    pub base_log_rate: (f64, f64),
    /// Range of per-series logits for P(count > 0).
    #[serde(default = "d_zero_logit")]
    pub zero_logit: (f64, f64),
    /// Initial scale of the weekday effects.
    #[serde(default = "d_weekly_amplitude")]
    pub weekly_amplitude: f64,
    /// Range of per-series loadings on the shared factor.
    #[serde(default = "d_loading")]
    pub loading: (f64, f64),
    /// Weekly random-walk standard deviation of the weekday effects.
    #[serde(default = "d_factor_sd")]
    pub factor_innovation_sd: f64,
    /// Over-dispersion: counts mix the Poisson rate with a
    /// Gamma(kappa, kappa) multiplier, kappa = rho / (1 - rho); 1 means
    /// no extra dispersion.
    #[serde(default = "d_one")]
    pub rho: f64,
}

fn d_n_series() -> usize {
    10
}
fn d_days() -> usize {
    365
}
fn d_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 1, 1).unwrap()
}
fn d_base_log_rate() -> (f64, f64) {
    (0.0, 2.0)
}
fn d_zero_logit() -> (f64, f64) {
    (0.0, 2.5)
}
fn d_weekly_amplitude() -> f64 {
    0.3
}
fn d_loading() -> (f64, f64) {
    (0.7, 1.3)
}
fn d_factor_sd() -> f64 {
    0.05
}
fn d_one() -> f64 {
    1.0
}

impl Default for SimulateConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("default simulate config")
    }
}

impl SimulateConfig {
    pub fn load(path: &Path) -> Result<SimulateConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let cfg: SimulateConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_series == 0 || self.days == 0 {
            return Err(CliError::input("simulation needs n_series >= 1 and days >= 1"));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(CliError::input(format!("rho must be in (0, 1], got {}", self.rho)));
        }
        for (name, (lo, hi)) in [
            ("base_log_rate", self.base_log_rate),
            ("zero_logit", self.zero_logit),
            ("loading", self.loading),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(CliError::input(format!("{name} range ({lo}, {hi}) is invalid")));
            }
        }
        if self.weekly_amplitude < 0.0 || self.factor_innovation_sd < 0.0 {
            return Err(CliError::input("amplitudes must be non-negative"));
        }
        Ok(())
    }
}

/// Ground truth emitted alongside the data for recovery checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTruth {
    pub config: SimulateConfig,
    /// Per-series (base log rate, zero logit, loading), keyed by id.
    pub series: BTreeMap<String, SeriesTruth>,
    /// Shared factor value per day.
    pub factor: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesTruth {
    pub base_log_rate: f64,
    pub zero_logit: f64,
    pub loading: f64,
}

fn uniform(lo: f64, hi: f64, rng: &mut RngStream) -> Result<f64> {
    // Beta(1, 1) is U(0, 1)
    Ok(lo + (hi - lo) * Dist::Beta { a: 1.0, b: 1.0 }.sample(rng)?)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn cmd_simulate(
    cfg: &SimulateConfig,
    out_dir: &Path,
    seed: Option<u64>,
) -> Result<()> {
    ensure_out_dir(out_dir)?;
    cfg.validate()?;
    let seed = seed.unwrap_or(cfg.seed);

    // shared weekday effects: initialized at weekly_amplitude scale,
    // drifting each week, recentred to mean zero so the factor stays a
    // pure shape
    let mut rng = RngStream::new(seed, stream_id_for("simulate/factor"));
    let mut effects = [0.0f64; 7];
    for e in &mut effects {
        *e = Dist::Normal { mean: 0.0, var: cfg.weekly_amplitude * cfg.weekly_amplitude }
            .sample(&mut rng)?;
    }
    let recentre = |effects: &mut [f64; 7]| {
        let m = effects.iter().sum::<f64>() / 7.0;
        for e in effects.iter_mut() {
            *e -= m;
        }
    };
    recentre(&mut effects);
    let mut factor = Vec::with_capacity(cfg.days);
    for t in 0..cfg.days {
        if t > 0 && t % 7 == 0 && cfg.factor_innovation_sd > 0.0 {
            for e in &mut effects {
                *e += Dist::Normal {
                    mean: 0.0,
                    var: cfg.factor_innovation_sd * cfg.factor_innovation_sd,
                }
                .sample(&mut rng)?;
            }
            recentre(&mut effects);
        }
        let date = cfg.start_date + chrono::Days::new(t as u64);
        factor.push(effects[date.weekday().num_days_from_monday() as usize]);
    }

    let width = (cfg.n_series as f64).log10().floor() as usize + 1;
    let mut truth = BTreeMap::new();
    let mut series = BTreeMap::new();
    for i in 0..cfg.n_series {
        let id = format!("s{i:0width$}");
        let mut prng = RngStream::new(seed, stream_id_for(&format!("simulate/params/{id}")));
        let base = uniform(cfg.base_log_rate.0, cfg.base_log_rate.1, &mut prng)?;
        let logit = uniform(cfg.zero_logit.0, cfg.zero_logit.1, &mut prng)?;
        let loading = uniform(cfg.loading.0, cfg.loading.1, &mut prng)?;

        let mut yrng = RngStream::new(seed, stream_id_for(&format!("simulate/counts/{id}")));
        let p_nonzero = sigmoid(logit);
        let kappa = if cfg.rho < 1.0 { cfg.rho / (1.0 - cfg.rho) } else { 0.0 };
        let mut counts = Vec::with_capacity(cfg.days);
        for &phi in &factor {
            let z = Dist::Bernoulli { p: p_nonzero }.sample(&mut yrng)?;
            let y = if z > 0.5 {
                let mut mu = (base + loading * phi).exp();
                if kappa > 0.0 {
                    mu *= Dist::Gamma { shape: kappa, rate: kappa }.sample(&mut yrng)?;
                }
                1 + Dist::Poisson { mu }.sample(&mut yrng)? as u32
            } else {
                0
            };
            counts.push(Some(y));
        }
        truth.insert(
            id.clone(),
            SeriesTruth { base_log_rate: base, zero_logit: logit, loading },
        );
        series.insert(
            id.clone(),
            SeriesData { id, start: cfg.start_date, counts, covariates: BTreeMap::new() },
        );
    }

    let table = SeriesTable { covariate_names: Vec::new(), series };
    write_series_table(&out_dir.join("data.csv"), &table)?;
    let truth = SimulationTruth { config: cfg.clone(), series: truth, factor };
    let path = out_dir.join("truth.json");
    std::fs::write(&path, serde_json::to_string_pretty(&truth)?)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(())
}
