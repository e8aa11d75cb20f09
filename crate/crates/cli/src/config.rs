//! Run configuration: JSON-backed, with the shipped defaults
//! (binary-block discount 0.999, positive-block discount 0.99, rho grid
//! {0.4, 0.6, 0.8, 1.0}, S = 5000 samples, horizon k = 14).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::errors::{CliError, Result};

pub const DEFAULT_BINARY_DISCOUNT: f64 = 0.999;
pub const DEFAULT_POSITIVE_DISCOUNT: f64 = 0.99;

/// One structural block in a component config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BlockConfig {
    Level,
    Trend,
    Regression { predictors: Vec<String> },
    Seasonal { period: u32, harmonics: u32 },
}

impl BlockConfig {
    pub fn dim(&self) -> usize {
        match self {
            BlockConfig::Level => 1,
            BlockConfig::Trend => 2,
            BlockConfig::Regression { predictors } => predictors.len(),
            BlockConfig::Seasonal { period, harmonics } => {
                let h = *harmonics as usize;
                if period % 2 == 0 && h == (*period as usize) / 2 {
                    2 * h - 1
                } else {
                    2 * h
                }
            }
        }
    }
}

/// Structure and priors for one DGLM component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    #[serde(default = "level_blocks")]
    pub blocks: Vec<BlockConfig>,
    /// One discount per block; when omitted the component default
    /// applies to every block.
    #[serde(default)]
    pub discounts: Option<Vec<f64>>,
    /// Prior state mean, one entry per state element; defaults to zeros.
    #[serde(default)]
    pub prior_mean: Option<Vec<f64>>,
    /// Prior state variances (diagonal), one per element; defaults to 1.
    #[serde(default)]
    pub prior_var: Option<Vec<f64>>,
}

fn level_blocks() -> Vec<BlockConfig> {
    vec![BlockConfig::Level]
}

impl Default for ComponentConfig {
    fn default() -> Self {
        ComponentConfig { blocks: level_blocks(), discounts: None, prior_mean: None, prior_var: None }
    }
}

impl ComponentConfig {
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(BlockConfig::dim).sum()
    }

    pub fn discounts_or(&self, default: f64) -> Vec<f64> {
        self.discounts.clone().unwrap_or_else(|| vec![default; self.blocks.len()])
    }
}

/// Aggregate-level (multi-scale) model configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregateConfig {
    #[serde(default = "aggregate_blocks")]
    pub blocks: Vec<BlockConfig>,
    #[serde(default)]
    pub discounts: Option<Vec<f64>>,
    #[serde(default)]
    pub prior_mean: Option<Vec<f64>>,
    #[serde(default)]
    pub prior_var: Option<Vec<f64>>,
    /// Beta-Gamma volatility discount.
    #[serde(default = "d_vol_discount")]
    pub vol_discount: f64,
    /// Prior degrees of freedom and variance estimate.
    #[serde(default = "d_vol_n")]
    pub vol_n: f64,
    #[serde(default = "d_vol_s")]
    pub vol_s: f64,
    /// Covariate name under which factor values reach the series models.
    #[serde(default = "d_factor")]
    pub factor: String,
    /// Number of Monte Carlo factor paths per forecast origin; defaults
    /// to the run-level sample count.
    #[serde(default)]
    pub factor_samples: Option<usize>,
    /// Prior on each series' loading of the shared factor.
    #[serde(default = "d_loading_mean")]
    pub loading_prior_mean: f64,
    #[serde(default = "d_loading_var")]
    pub loading_prior_var: f64,
    #[serde(default = "d_one")]
    pub loading_discount: f64,
    /// Offset used for `ln(total)` when a daily total is zero.
    #[serde(default = "d_zero_offset")]
    pub zero_offset: f64,
}

fn aggregate_blocks() -> Vec<BlockConfig> {
    vec![BlockConfig::Level, BlockConfig::Seasonal { period: 7, harmonics: 3 }]
}

fn d_vol_discount() -> f64 {
    0.97
}
fn d_vol_n() -> f64 {
    5.0
}
fn d_vol_s() -> f64 {
    0.05
}
fn d_factor() -> String {
    "phi".into()
}
fn d_loading_mean() -> f64 {
    1.0
}
fn d_loading_var() -> f64 {
    0.25
}
fn d_one() -> f64 {
    1.0
}
fn d_zero_offset() -> f64 {
    0.5
}

impl Default for AggregateConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("default aggregate config")
    }
}

/// Top-level run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub binary: ComponentConfig,
    #[serde(default)]
    pub positive: ComponentConfig,
    /// Random-effects discount grid for the positive component.
    #[serde(default = "d_rho_grid")]
    pub rho_grid: Vec<f64>,
    /// Forecast horizon k.
    #[serde(default = "d_horizon")]
    pub horizon: usize,
    /// Monte Carlo sample count S.
    #[serde(default = "d_samples")]
    pub samples: usize,
    /// Observations consumed before any forecast is scored.
    #[serde(default = "d_warmup")]
    pub warmup: usize,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; `--threads` and `DCMM_THREADS` override.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub aggregate: Option<AggregateConfig>,
    /// HPD levels reported by evaluation.
    #[serde(default = "d_coverage_levels")]
    pub coverage_levels: Vec<f64>,
    #[serde(default = "d_calibration_bins")]
    pub calibration_bins: usize,
    /// Also write per-origin path-sample files from the multi-scale
    /// rolling loop (large; metrics never need them).
    #[serde(default)]
    pub emit_paths: bool,
}

fn d_rho_grid() -> Vec<f64> {
    vec![0.4, 0.6, 0.8, 1.0]
}
fn d_horizon() -> usize {
    14
}
fn d_samples() -> usize {
    5000
}
fn d_warmup() -> usize {
    30
}
fn d_coverage_levels() -> Vec<f64> {
    vec![0.5, 0.9, 0.95]
}
fn d_calibration_bins() -> usize {
    10
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("default run config")
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(CliError::input("horizon must be at least 1"));
        }
        if self.samples == 0 {
            return Err(CliError::input("sample count must be at least 1"));
        }
        if self.rho_grid.is_empty() || self.rho_grid.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
            return Err(CliError::input(format!(
                "rho grid must be non-empty with values in (0, 1], got {:?}",
                self.rho_grid
            )));
        }
        for (name, comp) in [("binary", &self.binary), ("positive", &self.positive)] {
            for spec in [&comp.prior_mean, &comp.prior_var] {
                if let Some(v) = spec {
                    if v.len() != comp.dim() {
                        return Err(CliError::input(format!(
                            "{name} prior has {} entries for a state of dimension {}",
                            v.len(),
                            comp.dim()
                        )));
                    }
                }
            }
            if let Some(d) = &comp.discounts {
                if d.len() != comp.blocks.len() {
                    return Err(CliError::input(format!(
                        "{name} has {} blocks but {} discounts",
                        comp.blocks.len(),
                        d.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Canonical key for a rho value in file columns and checkpoints.
    pub fn rho_key(rho: f64) -> String {
        format!("{rho}")
    }

    /// Thread-count resolution: flag beats `DCMM_THREADS` beats config
    /// beats "let the pool decide".
    pub fn resolve_threads(&self, flag: Option<usize>) -> Option<usize> {
        flag.or_else(|| {
            std::env::var("DCMM_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .or(self.threads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_json_gives_shipped_defaults() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.rho_grid, vec![0.4, 0.6, 0.8, 1.0]);
        assert_eq!(cfg.horizon, 14);
        assert_eq!(cfg.samples, 5000);
        assert_eq!(cfg.binary.blocks, vec![BlockConfig::Level]);
        assert_eq!(cfg.binary.discounts_or(DEFAULT_BINARY_DISCOUNT), vec![0.999]);
        assert_eq!(cfg.positive.discounts_or(DEFAULT_POSITIVE_DISCOUNT), vec![0.99]);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn block_dims_include_nyquist() {
        assert_eq!(BlockConfig::Seasonal { period: 7, harmonics: 3 }.dim(), 6);
        assert_eq!(BlockConfig::Seasonal { period: 12, harmonics: 6 }.dim(), 11);
        assert_eq!(BlockConfig::Trend.dim(), 2);
    }

    #[test]
    fn bad_configs_rejected() {
        let bad: RunConfig = serde_json::from_str(r#"{"horizon": 0}"#).unwrap();
        assert!(bad.validate().is_err());
        let bad: RunConfig = serde_json::from_str(r#"{"rho_grid": [1.5]}"#).unwrap();
        assert!(bad.validate().is_err());
        let bad: RunConfig =
            serde_json::from_str(r#"{"positive": {"prior_mean": [0.0, 0.0]}}"#).unwrap();
        assert!(bad.validate().is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"horzon": 3}"#).is_err());
    }

    #[test]
    fn config_json_round_trips() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{
                "positive": {
                    "blocks": [
                        {"type": "level"},
                        {"type": "regression", "predictors": ["price"]},
                        {"type": "seasonal", "period": 7, "harmonics": 2}
                    ],
                    "discounts": [0.95, 1.0, 0.99]
                },
                "aggregate": {"factor": "dow"},
                "horizon": 7,
                "seed": 11
            }"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.aggregate.as_ref().unwrap().factor, "dow");
        assert_eq!(cfg.aggregate.as_ref().unwrap().zero_offset, 0.5);
    }
}
