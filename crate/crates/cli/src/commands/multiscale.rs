//! `multiscale`: the rolling two-pipeline experiment. An aggregate-level
//! normal DLM on the log daily total supplies Monte Carlo draws of a
//! shared seasonal factor; every series is scored both standalone
//! (baseline) and conditioned on the shared draws with recoupled
//! posterior updates (multiscale), so the value of sharing information
//! across series can be read off directly.

use std::collections::BTreeMap;
use std::path::Path;

use dcmm_core::dcmm::Dcmm;
use dcmm_core::dglm::{seasonal_factor, Covariates};
use dcmm_core::eval::{mad, mrps, smse, ForecastRecord, Predictive};
use dcmm_core::multiscale::{
    aggregate_series, multiscale_forecast, multiscale_forecast_path, recoupled_update,
    FactorDraws,
};
use dcmm_core::special::{stream_id_for, RngStream};

use crate::artifacts::{
    csv_writer, write_factor_draws, write_forecast_samples, write_metrics, ForecastBlock,
    MetricRow,
};
use crate::commands::{ensure_out_dir, run_indexed, thread_pool};
use crate::config::RunConfig;
use crate::data::{format_f64, read_series_table, SeriesData};
use crate::errors::{CliError, Result};
use crate::model::{build_aggregate, build_dcmm, build_multiscale_dcmm, Checkpoint};

/// Everything one (rho, series) job produces.
struct JobResult {
    rho: String,
    series_id: String,
    baseline: Vec<MetricRow>,
    multiscale: Vec<MetricRow>,
    baseline_model: Dcmm,
    multiscale_model: Dcmm,
    degenerate_updates: usize,
    path_blocks: Vec<ForecastBlock>,
}

/// The shared aggregate pass: per-day plug-in factors, per-origin factor
/// draws after warmup, and the post-sample draws for fresh forecasts.
struct AggregatePass {
    plugin: Vec<f64>,
    draws: Vec<Option<FactorDraws>>,
    final_draws: FactorDraws,
    zero_totals_flagged: bool,
}

fn run_aggregate_pass(
    cfg: &RunConfig,
    seed: u64,
    counts: &[Vec<u32>],
    t_len: usize,
) -> Result<AggregatePass> {
    let agg_cfg = cfg.aggregate.as_ref().expect("caller checks for aggregate config");
    let mut agg = build_aggregate(agg_cfg)?;
    let (log_totals, flagged) = aggregate_series(counts, agg_cfg.zero_offset)?;
    let n_draws = agg_cfg.factor_samples.unwrap_or(cfg.samples);

    let mut plugin = Vec::with_capacity(t_len);
    let mut draws: Vec<Option<FactorDraws>> = Vec::with_capacity(t_len);
    for t in 0..t_len {
        // the state currently reflects days 0..t, so day t sits one step
        // ahead of it
        plugin.push(seasonal_factor(&agg.state, &agg.spec, 1)?.0);
        if t >= cfg.warmup {
            let mut rng = RngStream::new(seed, stream_id_for(&format!("factor/{t}")));
            draws.push(Some(agg.sample_factor_paths(
                &agg_cfg.factor,
                cfg.horizon,
                n_draws,
                &mut rng,
            )?));
        } else {
            draws.push(None);
        }
        agg.observe(log_totals[t])?;
    }
    let mut rng = RngStream::new(seed, stream_id_for("factor/final"));
    let final_draws =
        agg.sample_factor_paths(&agg_cfg.factor, cfg.horizon, n_draws, &mut rng)?;
    Ok(AggregatePass { plugin, draws, final_draws, zero_totals_flagged: flagged })
}

/// Scores collected along a rolling loop: per-horizon records and point
/// forecasts, turned into metric rows at the end.
#[derive(Default)]
struct Scores {
    /// horizon -> (records, predictive means, predictive medians, observed)
    per_h: BTreeMap<usize, (Vec<ForecastRecord>, Vec<f64>, Vec<f64>, Vec<u32>)>,
}

impl Scores {
    fn push(&mut self, h: usize, predictive: Predictive, observed: u32) {
        let slot = self.per_h.entry(h).or_default();
        slot.1.push(predictive.mean());
        slot.2.push(predictive.median() as f64);
        slot.3.push(observed);
        slot.0.push(ForecastRecord { predictive, observed });
    }

    fn rows(&self, series_id: &str, rho: &str) -> Result<Vec<MetricRow>> {
        let mut out = Vec::new();
        for (&h, (records, means, medians, observed)) in &self.per_h {
            let mut push = |metric: &str, value: f64| {
                out.push(MetricRow {
                    series_id: series_id.to_string(),
                    rho: rho.to_string(),
                    horizon: h,
                    metric: metric.into(),
                    value,
                });
            };
            push("mrps", mrps(records)?);
            if let Some(v) = smse(means, observed)? {
                push("smse", v);
            }
            push("mad", mad(medians, observed)?);
        }
        Ok(out)
    }
}

#[allow(clippy::too_many_arguments)]
fn run_series_job(
    cfg: &RunConfig,
    seed: u64,
    rho: f64,
    series: &SeriesData,
    pass: &AggregatePass,
) -> Result<JobResult> {
    let agg_cfg = cfg.aggregate.as_ref().expect("caller checks for aggregate config");
    let factor = agg_cfg.factor.as_str();
    let rho_key = RunConfig::rho_key(rho);
    let t_len = series.len();
    let horizon = cfg.horizon;

    let mut baseline = build_dcmm(cfg, rho)?;
    let mut multi = build_multiscale_dcmm(cfg, agg_cfg, rho)?;
    let mut base_scores = Scores::default();
    let mut multi_scores = Scores::default();
    let mut degenerate = 0usize;
    let mut path_blocks = Vec::new();

    for t in 0..t_len {
        let covs = series.covariates_at(t);
        let scoreable = t >= cfg.warmup && t + horizon <= t_len;
        if scoreable {
            // leads 1..=horizon from this origin land on days t..t+horizon-1
            let future: Vec<Covariates> =
                (0..horizon).map(|j| series.covariates_at(t + j)).collect();
            let observed: Vec<Option<u32>> =
                (0..horizon).map(|j| series.counts[t + j]).collect();
            let draws = pass.draws[t].as_ref().expect("draws exist after warmup");

            for (j, fc) in baseline.forecast_marginal(&future)?.into_iter().enumerate() {
                if let Some(y) = observed[j] {
                    base_scores.push(j + 1, Predictive::from_pmf(normalize(fc.pmf_vec()))?, y);
                }
            }
            for (j, ens) in multiscale_forecast(&multi, draws, &future)?.into_iter().enumerate()
            {
                if let Some(y) = observed[j] {
                    multi_scores.push(j + 1, Predictive::from_pmf(normalize(ens.pmf_vec()))?, y);
                }
            }
            if cfg.emit_paths {
                let mut rng = RngStream::new(
                    seed,
                    stream_id_for(&format!("mspath/{rho_key}/{}/{t}", series.id)),
                );
                let samples = multiscale_forecast_path(&multi, draws, &future, &mut rng)?;
                path_blocks.push(ForecastBlock {
                    series_id: series.id.clone(),
                    origin: series.date_at(t.saturating_sub(1)),
                    rho: rho_key.clone(),
                    paths: samples.paths,
                });
            }
        }

        // advance both pipelines through day t
        match series.counts[t] {
            Some(y) => {
                baseline.update(y, &covs)?;
                match pass.draws[t].as_ref() {
                    Some(draws) => {
                        let today: Vec<f64> = draws.draws.iter().map(|p| p[0]).collect();
                        let up = recoupled_update(&multi, y, factor, &today, &covs)?;
                        degenerate += up.degenerate_weights as usize;
                        multi = up.model;
                    }
                    None => {
                        let mut c = covs.clone();
                        c.insert(factor.to_string(), pass.plugin[t]);
                        multi.update(y, &c)?;
                    }
                }
            }
            None => {
                baseline = baseline.step_missing(&covs)?;
                let phi = match pass.draws[t].as_ref() {
                    Some(draws) => {
                        let today: Vec<f64> = draws.draws.iter().map(|p| p[0]).collect();
                        today.iter().sum::<f64>() / today.len() as f64
                    }
                    None => pass.plugin[t],
                };
                let mut c = covs.clone();
                c.insert(factor.to_string(), phi);
                multi = multi.step_missing(&c)?;
            }
        }
    }

    Ok(JobResult {
        baseline: base_scores.rows(&series.id, &rho_key)?,
        multiscale: multi_scores.rows(&series.id, &rho_key)?,
        rho: rho_key,
        series_id: series.id.clone(),
        baseline_model: baseline,
        multiscale_model: multi,
        degenerate_updates: degenerate,
        path_blocks,
    })
}

/// Tidies tiny truncation leakage so a pmf vector passes the strict
/// sum-to-one check.
fn normalize(mut masses: Vec<f64>) -> Vec<f64> {
    let total: f64 = masses.iter().sum();
    if total > 0.0 {
        for m in &mut masses {
            *m /= total;
        }
    }
    masses
}

pub fn cmd_multiscale(
    data_path: &Path,
    cfg: &RunConfig,
    out_dir: &Path,
    seed: Option<u64>,
    threads: Option<usize>,
) -> Result<()> {
    ensure_out_dir(out_dir)?;
    if cfg.aggregate.is_none() {
        return Err(CliError::input(
            "the multiscale command needs an `aggregate` section in the configuration",
        ));
    }
    let seed = seed.unwrap_or(cfg.seed);
    let table = read_series_table(data_path)?;
    let ids = table.ids();
    let first = &table.series[&ids[0]];
    let (start, t_len) = (first.start, first.len());
    for s in table.series.values() {
        if s.start != start || s.len() != t_len {
            return Err(CliError::input(format!(
                "multiscale aggregation needs aligned series; '{}' runs {}..{} but '{}' runs \
                 {}..{}",
                first.id,
                first.start,
                first.end(),
                s.id,
                s.start,
                s.end()
            )));
        }
    }
    if t_len <= cfg.warmup + cfg.horizon {
        return Err(CliError::input(format!(
            "{t_len} days cannot cover warmup {} plus horizon {}",
            cfg.warmup, cfg.horizon
        )));
    }

    // missing counts contribute nothing to the daily total
    let counts: Vec<Vec<u32>> = table
        .series
        .values()
        .map(|s| s.counts.iter().map(|c| c.unwrap_or(0)).collect())
        .collect();
    let pass = run_aggregate_pass(cfg, seed, &counts, t_len)?;

    let mut jobs: Vec<(f64, String)> = Vec::new();
    for &rho in &cfg.rho_grid {
        for id in &ids {
            jobs.push((rho, id.clone()));
        }
    }
    let pool = thread_pool(cfg.resolve_threads(threads))?;
    let results: Vec<Result<JobResult>> = run_indexed(&pool, jobs.len(), |i| {
        let (rho, ref id) = jobs[i];
        run_series_job(cfg, seed, rho, &table.series[id], &pass)
    });

    let mut baseline_rows = Vec::new();
    let mut multiscale_rows = Vec::new();
    let mut baseline_models: BTreeMap<String, BTreeMap<String, Dcmm>> = BTreeMap::new();
    let mut multiscale_models: BTreeMap<String, BTreeMap<String, Dcmm>> = BTreeMap::new();
    let mut degenerate = 0usize;
    let mut path_blocks = Vec::new();
    for r in results {
        let r = r?;
        baseline_rows.extend(r.baseline);
        multiscale_rows.extend(r.multiscale);
        baseline_models
            .entry(r.rho.clone())
            .or_default()
            .insert(r.series_id.clone(), r.baseline_model);
        multiscale_models
            .entry(r.rho)
            .or_default()
            .insert(r.series_id, r.multiscale_model);
        degenerate += r.degenerate_updates;
        path_blocks.extend(r.path_blocks);
    }

    write_metrics(&out_dir.join("baseline_metrics.csv"), &baseline_rows)?;
    write_metrics(&out_dir.join("multiscale_metrics.csv"), &multiscale_rows)?;
    write_comparison(&out_dir.join("comparison.csv"), &baseline_rows, &multiscale_rows)?;
    write_factor_draws(&out_dir.join("factor_draws.csv"), &pass.final_draws)?;
    if cfg.emit_paths {
        path_blocks.sort_by(|a, b| {
            (&a.series_id, a.origin, &a.rho).cmp(&(&b.series_id, b.origin, &b.rho))
        });
        write_forecast_samples(&out_dir.join("multiscale_samples.csv"), &path_blocks)?;
    }

    let end_dates: BTreeMap<String, chrono::NaiveDate> =
        table.series.iter().map(|(id, s)| (id.clone(), s.end())).collect();
    Checkpoint {
        seed,
        covariate_names: table.covariate_names.clone(),
        end_dates: end_dates.clone(),
        models: baseline_models,
    }
    .save(&out_dir.join("baseline_checkpoint.json"))?;
    Checkpoint {
        seed,
        covariate_names: table.covariate_names.clone(),
        end_dates,
        models: multiscale_models,
    }
    .save(&out_dir.join("multiscale_checkpoint.json"))?;

    let summary = serde_json::json!({
        "n_series": table.n_series(),
        "days": t_len,
        "eval_origins": t_len - cfg.warmup - cfg.horizon + 1,
        "degenerate_recoupled_updates": degenerate,
        "zero_totals_flagged": pass.zero_totals_flagged,
    });
    let path = out_dir.join("run_summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary)?)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Best-over-rho comparison per (series, horizon, metric): lower is
/// better for every reported metric, and the percentage change is
/// relative to the baseline (negative means multiscale improved).
fn write_comparison(
    path: &Path,
    baseline: &[MetricRow],
    multiscale: &[MetricRow],
) -> Result<()> {
    type Key = (String, usize, String);
    let best = |rows: &[MetricRow]| -> BTreeMap<Key, f64> {
        let mut out: BTreeMap<Key, f64> = BTreeMap::new();
        for r in rows {
            let key = (r.series_id.clone(), r.horizon, r.metric.clone());
            out.entry(key)
                .and_modify(|v| *v = v.min(r.value))
                .or_insert(r.value);
        }
        out
    };
    let b = best(baseline);
    let m = best(multiscale);
    let mut w = csv_writer(path)?;
    w.write_record([
        "series_id", "horizon", "metric", "baseline_best", "multiscale_best", "pct_change",
    ])?;
    for ((series_id, horizon, metric), bv) in &b {
        let Some(mv) = m.get(&(series_id.clone(), *horizon, metric.clone())) else {
            continue;
        };
        let pct = if *bv != 0.0 { (mv - bv) / bv * 100.0 } else { f64::NAN };
        w.write_record([
            series_id.as_str(),
            &horizon.to_string(),
            metric,
            &format_f64(*bv),
            &format_f64(*mv),
            &format_f64(pct),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commands::{cmd_simulate, SimulateConfig};

    fn small_cfg() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.rho_grid = vec![1.0];
        cfg.horizon = 3;
        cfg.warmup = 10;
        cfg.samples = 1000;
        let mut agg = crate::config::AggregateConfig::default();
        agg.factor_samples = Some(10);
        cfg.aggregate = Some(agg);
        cfg
    }

    #[test]
    fn multiscale_run_is_deterministic_and_complete() {
        let dir = tempfile::tempdir().unwrap();
        let mut sim = SimulateConfig::default();
        sim.n_series = 3;
        sim.days = 30;
        sim.seed = 11;
        cmd_simulate(&sim, dir.path(), None).unwrap();
        let data = dir.path().join("data.csv");
        let cfg = small_cfg();
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        cmd_multiscale(&data, &cfg, &a, None, Some(1)).unwrap();
        cmd_multiscale(&data, &cfg, &b, None, Some(3)).unwrap();
        for f in [
            "baseline_metrics.csv",
            "multiscale_metrics.csv",
            "comparison.csv",
            "factor_draws.csv",
            "baseline_checkpoint.json",
            "multiscale_checkpoint.json",
            "run_summary.json",
        ] {
            assert_eq!(
                std::fs::read(a.join(f)).unwrap(),
                std::fs::read(b.join(f)).unwrap(),
                "{f} differs across thread counts"
            );
        }
        let rows = crate::artifacts::read_metrics(&a.join("baseline_metrics.csv")).unwrap();
        // 3 series x 3 horizons x 3 metrics
        assert_eq!(rows.len(), 27, "{rows:?}");
    }

    #[test]
    fn misaligned_series_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data.csv");
        std::fs::write(
            &data,
            "series_id,date,count\n\
             a,2024-01-01,1\na,2024-01-02,2\n\
             b,2024-01-02,1\nb,2024-01-03,2\n",
        )
        .unwrap();
        let cfg = small_cfg();
        let err = cmd_multiscale(&data, &cfg, &dir.path().join("o"), None, Some(1)).unwrap_err();
        assert!(err.to_string().contains("aligned"), "{err}");
    }
}
