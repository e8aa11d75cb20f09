//! `fit`: sequential filtering over the training range, one model per
//! (rho, series), written as a JSON checkpoint.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dcmm_core::dcmm::Dcmm;

use crate::artifacts::csv_writer;
use crate::commands::{ensure_out_dir, run_indexed, thread_pool, write_failures};
use crate::config::RunConfig;
use crate::data::{read_series_table_partial, SeriesData};
use crate::errors::{CliError, Result};
use crate::model::{build_dcmm, Checkpoint};

/// What `fit` produced: where the checkpoint went and which series were
/// dropped (with their diagnostics).
#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub checkpoint: PathBuf,
    pub n_fitted: usize,
    pub failures: BTreeMap<String, String>,
}

/// Runs one series through the filter and reports the final model.
fn fit_series(series: &SeriesData, cfg: &RunConfig, rho: f64) -> Result<Dcmm> {
    let mut model = build_dcmm(cfg, rho)?;
    for t in 0..series.len() {
        let covs = series.covariates_at(t);
        match series.counts[t] {
            Some(y) => {
                model.update(y, &covs)?;
            }
            None => {
                model = model.step_missing(&covs)?;
            }
        }
    }
    Ok(model)
}

pub fn cmd_fit(
    data_path: &Path,
    cfg: &RunConfig,
    out_dir: &Path,
    seed: Option<u64>,
    threads: Option<usize>,
) -> Result<FitOutcome> {
    ensure_out_dir(out_dir)?;
    let seed = seed.unwrap_or(cfg.seed);
    let outcome = read_series_table_partial(data_path)?;
    let mut failures = outcome.failures;
    let table = outcome.table;
    let ids = table.ids();

    let mut jobs: Vec<(f64, String)> = Vec::new();
    for &rho in &cfg.rho_grid {
        for id in &ids {
            jobs.push((rho, id.clone()));
        }
    }
    let pool = thread_pool(cfg.resolve_threads(threads))?;
    let results = run_indexed(&pool, jobs.len(), |i| {
        let (rho, ref id) = jobs[i];
        let start = Instant::now();
        let fitted = fit_series(&table.series[id], cfg, rho);
        (rho, id.clone(), fitted, start.elapsed().as_secs_f64())
    });

    let mut models: BTreeMap<String, BTreeMap<String, Dcmm>> = BTreeMap::new();
    let mut timings: Vec<(String, String, f64)> = Vec::new();
    let mut numerical_failure = false;
    for (rho, id, fitted, seconds) in results {
        let key = RunConfig::rho_key(rho);
        timings.push((id.clone(), key.clone(), seconds));
        match fitted {
            Ok(model) => {
                models.entry(key).or_default().insert(id, model);
            }
            Err(e) => {
                numerical_failure |= matches!(e, CliError::Numerical(_));
                failures.entry(id).or_insert_with(|| e.to_string());
            }
        }
    }
    // a series that failed under any rho is dropped everywhere, so the
    // checkpoint stays rectangular
    for per_rho in models.values_mut() {
        per_rho.retain(|id, _| !failures.contains_key(id));
    }
    let n_fitted = models.values().next().map_or(0, BTreeMap::len);

    let checkpoint_path = out_dir.join("checkpoint.json");
    let checkpoint = Checkpoint {
        seed,
        covariate_names: table.covariate_names.clone(),
        end_dates: table
            .series
            .iter()
            .filter(|(id, _)| !failures.contains_key(*id))
            .map(|(id, s)| (id.clone(), s.end()))
            .collect(),
        models,
    };
    checkpoint.save(&checkpoint_path)?;
    write_timings(out_dir, &timings)?;
    write_failures(out_dir, &failures)?;

    if n_fitted == 0 {
        let first = failures.values().next().cloned().unwrap_or_default();
        return Err(if numerical_failure {
            CliError::numerical(format!("no series could be fitted: {first}"))
        } else {
            CliError::input(format!("no series could be fitted: {first}"))
        });
    }
    if numerical_failure {
        return Err(CliError::numerical(format!(
            "{} series failed; see failures.json (checkpoint covers the rest)",
            failures.len()
        )));
    }
    Ok(FitOutcome { checkpoint: checkpoint_path, n_fitted, failures })
}

/// Per-series timing table plus percentiles; wall-clock, so this file is
/// informational and excluded from determinism comparisons.
fn write_timings(out_dir: &Path, timings: &[(String, String, f64)]) -> Result<()> {
    let path = out_dir.join("timings.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["series_id", "rho", "seconds"])?;
    for (id, rho, secs) in timings {
        w.write_record([id.as_str(), rho, &format!("{secs:.6}")])?;
    }
    w.flush()?;

    let mut sorted: Vec<f64> = timings.iter().map(|t| t.2).collect();
    sorted.sort_unstable_by(f64::total_cmp);
    let pick = |q: f64| -> f64 {
        if sorted.is_empty() {
            return 0.0;
        }
        let idx = ((sorted.len() as f64 * q).ceil() as usize).max(1) - 1;
        sorted[idx.min(sorted.len() - 1)]
    };
    let summary = serde_json::json!({
        "n_jobs": timings.len(),
        "seconds_p50": pick(0.5),
        "seconds_p90": pick(0.9),
        "seconds_p99": pick(0.99),
    });
    let path = out_dir.join("timing_summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary)?)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(())
}
