//! `forecast`: Monte Carlo path forecasts from a fitted checkpoint,
//! optionally under shared-factor uncertainty from a factor-draw file.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use dcmm_core::dglm::Covariates;
use dcmm_core::multiscale::multiscale_forecast_path;
use dcmm_core::special::{stream_id_for, RngStream};

use crate::artifacts::{
    read_factor_draws, write_forecast_samples, write_forecast_summary, ForecastBlock,
};
use crate::commands::{ensure_out_dir, run_indexed, thread_pool};
use crate::config::RunConfig;
use crate::errors::{CliError, Result};
use crate::model::Checkpoint;

/// Future covariate rows keyed by (series, date).
type FutureCovariates = BTreeMap<String, BTreeMap<NaiveDate, Covariates>>;

fn read_future(path: &Path, names: &[String]) -> Result<FutureCovariates> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let cols: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if cols.len() < 2 || cols[0] != "series_id" || cols[1] != "date" {
        return Err(CliError::input(format!(
            "{}: header must start with series_id,date",
            path.display()
        )));
    }
    let have: Vec<&String> = cols[2..].iter().collect();
    for name in names {
        if !have.contains(&name) {
            return Err(CliError::input(format!(
                "{}: missing covariate column '{name}'",
                path.display()
            )));
        }
    }
    let mut out: FutureCovariates = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let r = record?;
        let at = |msg: String| CliError::input(format!("{}:{line}: {msg}", path.display()));
        let date = NaiveDate::parse_from_str(&r[1], "%Y-%m-%d")
            .map_err(|e| at(format!("bad date '{}': {e}", &r[1])))?;
        let mut covs = Covariates::new();
        for (j, name) in cols[2..].iter().enumerate() {
            let v: f64 = r[2 + j]
                .parse()
                .map_err(|e| at(format!("bad value for {name}: {e}")))?;
            covs.insert(name.clone(), v);
        }
        if out.entry(r[0].to_string()).or_default().insert(date, covs).is_some() {
            return Err(at(format!("duplicate ({}, {date})", &r[0])));
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_forecast(
    checkpoint_path: &Path,
    cfg: &RunConfig,
    future_path: Option<&Path>,
    factor_draws_path: Option<&Path>,
    out_dir: &Path,
    seed: Option<u64>,
    threads: Option<usize>,
) -> Result<()> {
    ensure_out_dir(out_dir)?;
    let checkpoint = Checkpoint::load(checkpoint_path)?;
    let seed = seed.unwrap_or(checkpoint.seed);
    let horizon = cfg.horizon;

    let future = match (future_path, checkpoint.covariate_names.is_empty()) {
        (Some(p), _) => Some(read_future(p, &checkpoint.covariate_names)?),
        (None, true) => None,
        (None, false) => {
            return Err(CliError::input(format!(
                "checkpoint uses covariates {:?}; supply a future-covariate file",
                checkpoint.covariate_names
            )));
        }
    };
    let draws = factor_draws_path.map(read_factor_draws).transpose()?;
    if let Some(d) = &draws {
        if d.horizons() < horizon {
            return Err(CliError::input(format!(
                "factor draws cover {} horizons but {horizon} are required",
                d.horizons()
            )));
        }
    }

    let mut jobs: Vec<(String, String)> = Vec::new(); // (rho key, series id)
    for rho_key in checkpoint.models.keys() {
        for id in checkpoint.models[rho_key].keys() {
            jobs.push((rho_key.clone(), id.clone()));
        }
    }
    let pool = thread_pool(cfg.resolve_threads(threads))?;
    let results: Vec<Result<ForecastBlock>> = run_indexed(&pool, jobs.len(), |i| {
        let (ref rho_key, ref id) = jobs[i];
        let model = &checkpoint.models[rho_key][id];
        let origin = checkpoint.end_dates[id];
        // per-horizon covariates for days origin+1 ..= origin+horizon
        let mut covs = Vec::with_capacity(horizon);
        for h in 1..=horizon {
            let date = origin + chrono::Days::new(h as u64);
            let c = match &future {
                Some(f) => f
                    .get(id)
                    .and_then(|per_date| per_date.get(&date))
                    .cloned()
                    .ok_or_else(|| {
                        CliError::input(format!("no future covariates for ({id}, {date})"))
                    })?,
                None => Covariates::new(),
            };
            covs.push(c);
        }
        let mut rng =
            RngStream::new(seed, stream_id_for(&format!("forecast/{rho_key}/{id}")));
        let paths = match &draws {
            Some(d) => multiscale_forecast_path(model, d, &covs, &mut rng)?.paths,
            None => model.forecast_path(&covs, cfg.samples, &mut rng)?.paths,
        };
        Ok(ForecastBlock { series_id: id.clone(), origin, rho: rho_key.clone(), paths })
    });

    let mut blocks = Vec::with_capacity(results.len());
    for r in results {
        blocks.push(r?);
    }
    blocks.sort_by(|a, b| {
        (&a.series_id, a.origin, &a.rho).cmp(&(&b.series_id, b.origin, &b.rho))
    });
    write_forecast_samples(&out_dir.join("samples.csv"), &blocks)?;
    write_forecast_summary(&out_dir.join("summary.csv"), &blocks)?;
    Ok(())
}
