//! `evaluate`: scores forecast-sample files against realized counts.
//!
//! Per (series, rho, horizon) it reports ranked probability score, scaled
//! squared error of the predictive mean, and absolute error of the
//! predictive median. Pooled across series at horizon 1 it reports HPD
//! coverage, a randomized PIT with a Kolmogorov-Smirnov test, and a
//! reliability table for the zero/non-zero part.

use std::collections::BTreeMap;
use std::path::Path;

use dcmm_core::eval::{
    binary_calibration, coverage, ks_test_uniform, mrps, randomized_pit, smse, ForecastRecord,
    Predictive,
};
use dcmm_core::special::{stream_id_for, RngStream};

use crate::artifacts::{csv_writer, read_forecast_samples, write_metrics, MetricRow};
use crate::commands::ensure_out_dir;
use crate::config::RunConfig;
use crate::data::{format_f64, read_series_table, SeriesTable};
use crate::errors::{CliError, Result};

/// One scored forecast: the sample-based predictive plus its outcome.
struct Scored {
    series_id: String,
    rho: String,
    horizon: usize,
    record: ForecastRecord,
    point_mean: f64,
    point_median: f64,
    p_nonzero: f64,
}

fn observed_at(table: &SeriesTable, series_id: &str, date: chrono::NaiveDate) -> Result<Option<u32>> {
    let series = table.series.get(series_id).ok_or_else(|| {
        CliError::input(format!("forecast references unknown series '{series_id}'"))
    })?;
    let offset = (date - series.start).num_days();
    if offset < 0 {
        return Err(CliError::input(format!(
            "forecast for ({series_id}, {date}) predates the series start {}",
            series.start
        )));
    }
    if offset as usize >= series.len() {
        return Ok(None); // beyond the observed range: nothing to score
    }
    Ok(series.counts[offset as usize])
}

pub fn cmd_evaluate(
    data_path: &Path,
    cfg: &RunConfig,
    forecast_paths: &[std::path::PathBuf],
    out_dir: &Path,
    seed: Option<u64>,
) -> Result<()> {
    ensure_out_dir(out_dir)?;
    let seed = seed.unwrap_or(cfg.seed);
    let table = read_series_table(data_path)?;
    if forecast_paths.is_empty() {
        return Err(CliError::input("evaluate needs at least one forecast file"));
    }

    let mut scored: Vec<Scored> = Vec::new();
    for path in forecast_paths {
        for block in read_forecast_samples(path)? {
            let horizons = block.paths.first().map_or(0, Vec::len);
            for h in 1..=horizons {
                let date = block.origin + chrono::Days::new(h as u64);
                let Some(y) = observed_at(&table, &block.series_id, date)? else {
                    continue; // unobserved or explicitly missing
                };
                let draws: Vec<u32> = block.paths.iter().map(|p| p[h - 1]).collect();
                let nonzero = draws.iter().filter(|&&v| v > 0).count() as f64;
                let p_nonzero = nonzero / draws.len() as f64;
                let predictive = Predictive::from_samples(draws)?;
                let point_mean = predictive.mean();
                let point_median = predictive.median() as f64;
                scored.push(Scored {
                    series_id: block.series_id.clone(),
                    rho: block.rho.clone(),
                    horizon: h,
                    record: ForecastRecord { predictive, observed: y },
                    point_mean,
                    point_median,
                    p_nonzero,
                });
            }
        }
    }
    if scored.is_empty() {
        return Err(CliError::input(
            "no forecast overlaps the observed data; nothing to evaluate",
        ));
    }

    // per (series, rho, horizon) metrics over every scored origin
    let mut groups: BTreeMap<(String, String, usize), Vec<&Scored>> = BTreeMap::new();
    for s in &scored {
        groups
            .entry((s.series_id.clone(), s.rho.clone(), s.horizon))
            .or_default()
            .push(s);
    }
    let mut rows: Vec<MetricRow> = Vec::new();
    for ((series_id, rho, horizon), group) in &groups {
        let records: Vec<ForecastRecord> =
            group.iter().map(|s| s.record.clone()).collect();
        let means: Vec<f64> = group.iter().map(|s| s.point_mean).collect();
        let medians: Vec<f64> = group.iter().map(|s| s.point_median).collect();
        let observed: Vec<u32> = group.iter().map(|s| s.record.observed).collect();
        let mut push = |metric: &str, value: f64| {
            rows.push(MetricRow {
                series_id: series_id.clone(),
                rho: rho.clone(),
                horizon: *horizon,
                metric: metric.into(),
                value,
            });
        };
        push("mrps", mrps(&records)?);
        if let Some(v) = smse(&means, &observed)? {
            push("smse", v);
        }
        push("mad", dcmm_core::eval::mad(&medians, &observed)?);
    }
    write_metrics(&out_dir.join("metrics.csv"), &rows)?;
    write_best_rho(&out_dir.join("best_rho.csv"), &rows)?;

    // pooled diagnostics at horizon 1, per rho
    let mut pooled: BTreeMap<String, Vec<&Scored>> = BTreeMap::new();
    for s in &scored {
        if s.horizon == 1 {
            pooled.entry(s.rho.clone()).or_default().push(s);
        }
    }
    write_pooled(out_dir, cfg, seed, &pooled)?;
    Ok(())
}

/// For each (series, horizon, metric), the rho with the smallest value.
fn write_best_rho(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut best: BTreeMap<(String, usize, String), (String, f64)> = BTreeMap::new();
    for r in rows {
        let key = (r.series_id.clone(), r.horizon, r.metric.clone());
        match best.get(&key) {
            Some((_, v)) if *v <= r.value => {}
            _ => {
                best.insert(key, (r.rho.clone(), r.value));
            }
        }
    }
    let mut w = csv_writer(path)?;
    w.write_record(["series_id", "horizon", "metric", "best_rho", "value"])?;
    for ((series_id, horizon, metric), (rho, value)) in best {
        w.write_record([
            series_id.as_str(),
            &horizon.to_string(),
            &metric,
            &rho,
            &format_f64(value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_pooled(
    out_dir: &Path,
    cfg: &RunConfig,
    seed: u64,
    pooled: &BTreeMap<String, Vec<&Scored>>,
) -> Result<()> {
    let mut cov_w = csv_writer(&out_dir.join("coverage.csv"))?;
    cov_w.write_record([
        "rho", "level", "empirical", "mean_mass", "contiguous_fraction", "n",
    ])?;
    let mut pit_w = csv_writer(&out_dir.join("pit.csv"))?;
    pit_w.write_record(["rho", "index", "value"])?;
    let mut ks_w = csv_writer(&out_dir.join("pit_tests.csv"))?;
    ks_w.write_record(["rho", "ks_d", "ks_p", "n"])?;
    let mut cal_w = csv_writer(&out_dir.join("calibration.csv"))?;
    cal_w.write_record(["rho", "lo", "hi", "n", "mean_forecast", "frequency", "wald_lo", "wald_hi"])?;

    for (rho, group) in pooled {
        let records: Vec<ForecastRecord> = group.iter().map(|s| s.record.clone()).collect();
        for &level in &cfg.coverage_levels {
            let c = coverage(&records, level)?;
            cov_w.write_record([
                rho.as_str(),
                &format_f64(c.level),
                &format_f64(c.empirical),
                &format_f64(c.mean_mass),
                &format_f64(c.contiguous_fraction),
                &c.n.to_string(),
            ])?;
        }
        let mut rng = RngStream::new(seed, stream_id_for(&format!("pit/{rho}")));
        let pit = randomized_pit(&records, &mut rng)?;
        for (i, &u) in pit.iter().enumerate() {
            pit_w.write_record([rho.as_str(), &i.to_string(), &format_f64(u)])?;
        }
        let (d, p) = ks_test_uniform(&pit)?;
        ks_w.write_record([
            rho.as_str(),
            &format_f64(d),
            &format_f64(p),
            &pit.len().to_string(),
        ])?;
        let probs: Vec<f64> = group.iter().map(|s| s.p_nonzero).collect();
        let outcomes: Vec<bool> = group.iter().map(|s| s.record.observed > 0).collect();
        for b in binary_calibration(&probs, &outcomes, cfg.calibration_bins)?.bins {
            cal_w.write_record([
                rho.as_str(),
                &format_f64(b.lo),
                &format_f64(b.hi),
                &b.n.to_string(),
                &format_f64(b.mean_forecast),
                &format_f64(b.frequency),
                &format_f64(b.wald.0),
                &format_f64(b.wald.1),
            ])?;
        }
    }
    cov_w.flush()?;
    pit_w.flush()?;
    ks_w.flush()?;
    cal_w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifacts::{write_forecast_samples, ForecastBlock};
    use chrono::NaiveDate;
    use std::io::Write;

    fn setup(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
        let data = dir.join("data.csv");
        let mut f = std::fs::File::create(&data).unwrap();
        // origin 2024-01-02: horizons 1 and 2 land on the 3rd and 4th
        f.write_all(
            b"series_id,date,count\n\
              a,2024-01-01,1\na,2024-01-02,2\na,2024-01-03,1\na,2024-01-04,0\n",
        )
        .unwrap();
        let samples = dir.join("samples.csv");
        // 1000 paths cycling fixed values, so the horizon-1 median is 1
        let paths: Vec<Vec<u32>> = (0..1000)
            .map(|i| vec![[0, 1, 2, 1][i % 4], [1, 2, 0, 1][i % 4]])
            .collect();
        let block = ForecastBlock {
            series_id: "a".into(),
            origin: NaiveDate::from_ymd_opt(2024, 1, 2).unwrap(),
            rho: "1".into(),
            paths,
        };
        write_forecast_samples(&samples, &[block]).unwrap();
        (data, samples)
    }

    #[test]
    fn evaluation_writes_metric_and_diagnostic_tables() {
        let dir = tempfile::tempdir().unwrap();
        let (data, samples) = setup(dir.path());
        let mut cfg = RunConfig::default();
        cfg.calibration_bins = 2;
        let out = dir.path().join("out");
        cmd_evaluate(&data, &cfg, &[samples], &out, Some(3)).unwrap();
        let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
        assert!(metrics.contains("mrps"));
        assert!(metrics.contains("smse"));
        // horizon-1 draws {0,1,2,1}: median 1, observed 1 -> mad 0
        assert!(metrics.lines().any(|l| l.starts_with("a,1,1,mad,0")), "{metrics}");
        for f in ["coverage.csv", "pit.csv", "pit_tests.csv", "calibration.csv", "best_rho.csv"] {
            assert!(out.join(f).exists(), "missing {f}");
        }
    }

    #[test]
    fn unknown_series_is_an_input_error() {
        let dir = tempfile::tempdir().unwrap();
        let (_, samples) = setup(dir.path());
        let other = dir.path().join("other.csv");
        std::fs::write(&other, "series_id,date,count\nzz,2024-01-01,1\n").unwrap();
        let cfg = RunConfig::default();
        let err = cmd_evaluate(&other, &cfg, &[samples], &dir.path().join("o"), None).unwrap_err();
        assert!(matches!(err, CliError::Input(_)), "{err}");
    }
}
