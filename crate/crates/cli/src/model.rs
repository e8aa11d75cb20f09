//! Builders from run configuration to concrete model objects, plus the
//! fit checkpoint format.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use dcmm_core::dcmm::{Component, Dcmm};
use dcmm_core::dglm::{Block, Link, ModelSpec, StateMoments, VolatilityState};
use dcmm_core::linalg::Matrix;
use dcmm_core::multiscale::AggregateModel;
use serde::{Deserialize, Serialize};

use crate::config::{
    AggregateConfig, BlockConfig, ComponentConfig, RunConfig, DEFAULT_BINARY_DISCOUNT,
    DEFAULT_POSITIVE_DISCOUNT,
};
use crate::errors::{CliError, Result};

fn to_blocks(blocks: &[BlockConfig]) -> Vec<Block> {
    blocks
        .iter()
        .map(|b| match b {
            BlockConfig::Level => Block::Level,
            BlockConfig::Trend => Block::LocalLinearTrend,
            BlockConfig::Regression { predictors } => {
                Block::Regression { predictors: predictors.clone() }
            }
            BlockConfig::Seasonal { period, harmonics } => {
                Block::FourierSeasonal { period: *period, harmonics: *harmonics }
            }
        })
        .collect()
}

fn prior_state(cfg: &ComponentConfig, dim: usize) -> Result<StateMoments> {
    let mean = cfg.prior_mean.clone().unwrap_or_else(|| vec![0.0; dim]);
    let vars = cfg.prior_var.clone().unwrap_or_else(|| vec![1.0; dim]);
    let mut cov = Matrix::zeros(dim);
    for (i, &v) in vars.iter().enumerate() {
        if v < 0.0 {
            return Err(CliError::input(format!("negative prior variance {v}")));
        }
        cov[(i, i)] = v;
    }
    Ok(StateMoments::new(mean, cov)?)
}

fn build_component(cfg: &ComponentConfig, link: Link, default_discount: f64) -> Result<Component> {
    let spec = ModelSpec::new(to_blocks(&cfg.blocks), cfg.discounts_or(default_discount), link)?;
    let state = prior_state(cfg, spec.dim())?;
    Ok(Component::new(spec, state)?)
}

/// Builds a fresh series model at the given random-effects discount.
pub fn build_dcmm(cfg: &RunConfig, rho: f64) -> Result<Dcmm> {
    let binary = build_component(&cfg.binary, Link::LogitBernoulli, DEFAULT_BINARY_DISCOUNT)?;
    let positive = build_component(&cfg.positive, Link::LogPoisson, DEFAULT_POSITIVE_DISCOUNT)?;
    let positive = Component {
        spec: positive.spec.with_re_discount(rho)?,
        state: positive.state,
    };
    Ok(Dcmm::new(binary, positive)?)
}

/// Builds a fresh series model carrying an extra regression block on the
/// shared factor, for the multi-scale pipeline.
pub fn build_multiscale_dcmm(cfg: &RunConfig, agg: &AggregateConfig, rho: f64) -> Result<Dcmm> {
    let mut positive_cfg = cfg.positive.clone();
    if positive_cfg
        .blocks
        .iter()
        .any(|b| matches!(b, BlockConfig::Regression { predictors } if predictors.contains(&agg.factor)))
    {
        return Err(CliError::input(format!(
            "positive component already regresses on the factor name '{}'",
            agg.factor
        )));
    }
    let dim = positive_cfg.dim();
    positive_cfg
        .blocks
        .push(BlockConfig::Regression { predictors: vec![agg.factor.clone()] });
    let mut discounts = positive_cfg.discounts_or(DEFAULT_POSITIVE_DISCOUNT);
    if positive_cfg.discounts.is_some() {
        discounts.push(agg.loading_discount);
    } else {
        *discounts.last_mut().unwrap() = agg.loading_discount;
    }
    positive_cfg.discounts = Some(discounts);
    let mut mean = positive_cfg.prior_mean.clone().unwrap_or_else(|| vec![0.0; dim]);
    let mut vars = positive_cfg.prior_var.clone().unwrap_or_else(|| vec![1.0; dim]);
    mean.push(agg.loading_prior_mean);
    vars.push(agg.loading_prior_var);
    positive_cfg.prior_mean = Some(mean);
    positive_cfg.prior_var = Some(vars);

    let binary = build_component(&cfg.binary, Link::LogitBernoulli, DEFAULT_BINARY_DISCOUNT)?;
    let positive = build_component(&positive_cfg, Link::LogPoisson, DEFAULT_POSITIVE_DISCOUNT)?;
    let positive = Component {
        spec: positive.spec.with_re_discount(rho)?,
        state: positive.state,
    };
    Ok(Dcmm::new(binary, positive)?)
}

/// Builds the aggregate-level normal DLM.
pub fn build_aggregate(agg: &AggregateConfig) -> Result<AggregateModel> {
    let blocks = to_blocks(&agg.blocks);
    if !blocks.iter().any(|b| matches!(b, Block::FourierSeasonal { .. })) {
        return Err(CliError::input("aggregate model needs a seasonal block to define the factor"));
    }
    let discounts = agg
        .discounts
        .clone()
        .unwrap_or_else(|| vec![DEFAULT_POSITIVE_DISCOUNT; blocks.len()]);
    let spec = ModelSpec::new(blocks, discounts, Link::IdentityNormal)?;
    let dim = spec.dim();
    let mean = agg.prior_mean.clone().unwrap_or_else(|| vec![0.0; dim]);
    let vars = agg.prior_var.clone().unwrap_or_else(|| vec![1.0; dim]);
    if mean.len() != dim || vars.len() != dim {
        return Err(CliError::input(format!(
            "aggregate prior needs {dim} entries, got {} means and {} variances",
            mean.len(),
            vars.len()
        )));
    }
    let mut cov = Matrix::zeros(dim);
    for (i, &v) in vars.iter().enumerate() {
        cov[(i, i)] = v;
    }
    let state = StateMoments::new(mean, cov)?;
    let vol = VolatilityState::new(agg.vol_n, agg.vol_s)?;
    Ok(AggregateModel::new(spec, state, vol, agg.vol_discount)?)
}

/// Fit artifact: final per-series posteriors for every rho on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub seed: u64,
    pub covariate_names: Vec<String>,
    /// Last observed date per series.
    pub end_dates: BTreeMap<String, NaiveDate>,
    /// rho key -> series id -> fitted model.
    pub models: BTreeMap<String, BTreeMap<String, Dcmm>>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_builds_level_models() {
        let cfg = RunConfig::default();
        let m = build_dcmm(&cfg, 0.6).unwrap();
        assert_eq!(m.binary.spec.dim(), 1);
        assert_eq!(m.positive.spec.dim(), 1);
        assert_eq!(m.rho(), 0.6);
        assert_eq!(m.binary.spec.discounts, vec![0.999]);
        assert_eq!(m.positive.spec.discounts, vec![0.99]);
    }

    #[test]
    fn multiscale_builder_appends_the_loading_block() {
        let cfg = RunConfig::default();
        let agg = AggregateConfig::default();
        let m = build_multiscale_dcmm(&cfg, &agg, 1.0).unwrap();
        assert_eq!(m.positive.spec.dim(), 2);
        assert_eq!(m.positive.state.mean, vec![0.0, 1.0]);
        assert_eq!(m.positive.state.cov[(1, 1)], 0.25);
        assert_eq!(m.positive.spec.discounts, vec![0.99, 1.0]);
        // clashing factor name is rejected
        let mut cfg2 = cfg.clone();
        cfg2.positive.blocks.push(BlockConfig::Regression { predictors: vec!["phi".into()] });
        assert!(build_multiscale_dcmm(&cfg2, &agg, 1.0).is_err());
    }

    #[test]
    fn aggregate_builder_requires_a_seasonal_block() {
        let mut agg = AggregateConfig::default();
        assert!(build_aggregate(&agg).is_ok());
        agg.blocks = vec![BlockConfig::Level];
        assert!(build_aggregate(&agg).is_err());
    }

    #[test]
    fn checkpoint_round_trips_bit_identically() {
        let cfg = RunConfig::default();
        let m = build_dcmm(&cfg, 0.8).unwrap();
        let mut models = BTreeMap::new();
        let mut per_rho = BTreeMap::new();
        per_rho.insert("s1".to_string(), m);
        models.insert(RunConfig::rho_key(0.8), per_rho);
        let mut end_dates = BTreeMap::new();
        end_dates.insert("s1".to_string(), NaiveDate::from_ymd_opt(2024, 3, 1).unwrap());
        let ck = Checkpoint {
            seed: 7,
            covariate_names: vec!["price".into()],
            end_dates,
            models,
        };
        let f = tempfile::NamedTempFile::new().unwrap();
        ck.save(f.path()).unwrap();
        let bytes1 = std::fs::read(f.path()).unwrap();
        let back = Checkpoint::load(f.path()).unwrap();
        assert_eq!(ck, back);
        back.save(f.path()).unwrap();
        let bytes2 = std::fs::read(f.path()).unwrap();
        assert_eq!(bytes1, bytes2);
    }
}
