//! Readers and writers for the run artifacts: forecast sample files,
//! summary quantiles, factor draws, and metric/plot tables. Every file
//! is CSV with a header, floats rendered by one shared formatter, rows
//! in deterministic order.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use dcmm_core::multiscale::FactorDraws;

use crate::data::format_f64;
use crate::errors::{CliError, Result};

/// One block of forecast paths: a series, an origin date (the last
/// observed day), and the sampled counts per path and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastBlock {
    pub series_id: String,
    pub origin: NaiveDate,
    pub rho: String,
    /// `paths[s][h]` is the draw on path `s` at lead time `h + 1`.
    pub paths: Vec<Vec<u32>>,
}

/// Writes forecast samples as long-format CSV:
/// `series_id,origin,rho,sample,horizon,value`.
pub fn write_forecast_samples(path: &Path, blocks: &[ForecastBlock]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["series_id", "origin", "rho", "sample", "horizon", "value"])?;
    for b in blocks {
        for (s, p) in b.paths.iter().enumerate() {
            for (h, &v) in p.iter().enumerate() {
                w.write_record([
                    b.series_id.as_str(),
                    &b.origin.format("%Y-%m-%d").to_string(),
                    &b.rho,
                    &s.to_string(),
                    &(h + 1).to_string(),
                    &v.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a forecast-sample file back into blocks, keyed and ordered by
/// `(series_id, origin, rho)`.
pub fn read_forecast_samples(path: &Path) -> Result<Vec<ForecastBlock>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let expect = ["series_id", "origin", "rho", "sample", "horizon", "value"];
    let got: Vec<&str> = reader.headers()?.iter().collect();
    if got != expect {
        return Err(CliError::input(format!(
            "{}: expected header {expect:?}, got {got:?}",
            path.display()
        )));
    }
    let mut map: BTreeMap<(String, NaiveDate, String), BTreeMap<(usize, usize), u32>> =
        BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let r = record?;
        let at = |msg: String| CliError::input(format!("{}:{line}: {msg}", path.display()));
        let origin = NaiveDate::parse_from_str(&r[1], "%Y-%m-%d")
            .map_err(|e| at(format!("bad origin '{}': {e}", &r[1])))?;
        let sample: usize = r[3].parse().map_err(|e| at(format!("bad sample index: {e}")))?;
        let horizon: usize = r[4].parse().map_err(|e| at(format!("bad horizon: {e}")))?;
        if horizon == 0 {
            return Err(at("horizon must be >= 1".into()));
        }
        let value: u32 = r[5].parse().map_err(|e| at(format!("bad value: {e}")))?;
        let key = (r[0].to_string(), origin, r[2].to_string());
        if map.entry(key).or_default().insert((sample, horizon), value).is_some() {
            return Err(at("duplicate (sample, horizon) pair".into()));
        }
    }
    let mut out = Vec::with_capacity(map.len());
    for ((series_id, origin, rho), cells) in map {
        let n_samples = cells.keys().map(|&(s, _)| s + 1).max().unwrap_or(0);
        let horizons = cells.keys().map(|&(_, h)| h).max().unwrap_or(0);
        if cells.len() != n_samples * horizons {
            return Err(CliError::input(format!(
                "{}: ragged sample grid for ({series_id}, {origin}, rho={rho})",
                path.display()
            )));
        }
        let mut paths = vec![vec![0u32; horizons]; n_samples];
        for ((s, h), v) in cells {
            paths[s][h - 1] = v;
        }
        out.push(ForecastBlock { series_id, origin, rho, paths });
    }
    Ok(out)
}

/// Writes the per-horizon summary table:
/// `series_id,origin,rho,horizon,mean,sd,q05,q25,q50,q75,q95`.
pub fn write_forecast_summary(path: &Path, blocks: &[ForecastBlock]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "series_id", "origin", "rho", "horizon", "mean", "sd", "q05", "q25", "q50", "q75", "q95",
    ])?;
    for b in blocks {
        let horizons = b.paths.first().map_or(0, Vec::len);
        for h in 0..horizons {
            let mut draws: Vec<u32> = b.paths.iter().map(|p| p[h]).collect();
            draws.sort_unstable();
            let n = draws.len() as f64;
            let mean = draws.iter().map(|&v| v as f64).sum::<f64>() / n;
            let var =
                draws.iter().map(|&v| (v as f64 - mean) * (v as f64 - mean)).sum::<f64>() / n;
            let q = |level: f64| -> u32 {
                let idx = ((n * level).ceil() as usize).max(1) - 1;
                draws[idx.min(draws.len() - 1)]
            };
            w.write_record([
                b.series_id.as_str(),
                &b.origin.format("%Y-%m-%d").to_string(),
                &b.rho,
                &(h + 1).to_string(),
                &format_f64(mean),
                &format_f64(var.sqrt()),
                &q(0.05).to_string(),
                &q(0.25).to_string(),
                &q(0.50).to_string(),
                &q(0.75).to_string(),
                &q(0.95).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes factor draws: `factor,origin,sample,horizon,value`.
pub fn write_factor_draws(path: &Path, draws: &FactorDraws) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["factor", "origin", "sample", "horizon", "value"])?;
    for (s, p) in draws.draws.iter().enumerate() {
        for (h, &v) in p.iter().enumerate() {
            w.write_record([
                draws.factor.as_str(),
                &draws.origin.to_string(),
                &s.to_string(),
                &(h + 1).to_string(),
                &format_f64(v),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a factor-draw file written by [`write_factor_draws`] (or by
/// hand, e.g. a single constant path).
pub fn read_factor_draws(path: &Path) -> Result<FactorDraws> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let expect = ["factor", "origin", "sample", "horizon", "value"];
    let got: Vec<&str> = reader.headers()?.iter().collect();
    if got != expect {
        return Err(CliError::input(format!(
            "{}: expected header {expect:?}, got {got:?}",
            path.display()
        )));
    }
    let mut factor: Option<String> = None;
    let mut origin = 0usize;
    let mut cells: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let r = record?;
        let at = |msg: String| CliError::input(format!("{}:{line}: {msg}", path.display()));
        match &factor {
            None => factor = Some(r[0].to_string()),
            Some(f) if f.as_str() != &r[0] => {
                return Err(at(format!("mixed factor names '{f}' and '{}'", &r[0])));
            }
            _ => {}
        }
        origin = r[1].parse().map_err(|e| at(format!("bad origin: {e}")))?;
        let sample: usize = r[2].parse().map_err(|e| at(format!("bad sample index: {e}")))?;
        let horizon: usize = r[3].parse().map_err(|e| at(format!("bad horizon: {e}")))?;
        if horizon == 0 {
            return Err(at("horizon must be >= 1".into()));
        }
        let value: f64 = r[4].parse().map_err(|e| at(format!("bad value: {e}")))?;
        if cells.insert((sample, horizon), value).is_some() {
            return Err(at("duplicate (sample, horizon) pair".into()));
        }
    }
    let factor = factor.ok_or_else(|| {
        CliError::input(format!("{}: no factor draw rows", path.display()))
    })?;
    let n_samples = cells.keys().map(|&(s, _)| s + 1).max().unwrap_or(0);
    let horizons = cells.keys().map(|&(_, h)| h).max().unwrap_or(0);
    if cells.len() != n_samples * horizons {
        return Err(CliError::input(format!("{}: ragged factor draw grid", path.display())));
    }
    let mut draws = vec![vec![0.0; horizons]; n_samples];
    for ((s, h), v) in cells {
        draws[s][h - 1] = v;
    }
    Ok(FactorDraws { factor, origin, draws })
}

/// A generic metric row: `series_id,rho,horizon,metric,value`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub series_id: String,
    pub rho: String,
    pub horizon: usize,
    pub metric: String,
    pub value: f64,
}

pub fn write_metrics(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["series_id", "rho", "horizon", "metric", "value"])?;
    for r in rows {
        w.write_record([
            r.series_id.as_str(),
            &r.rho,
            &r.horizon.to_string(),
            &r.metric,
            &format_f64(r.value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricRow>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let r = record?;
        out.push(MetricRow {
            series_id: r[0].to_string(),
            rho: r[1].to_string(),
            horizon: r[2].parse().map_err(|e| CliError::input(format!("bad horizon: {e}")))?,
            metric: r[3].to_string(),
            value: r[4].parse().map_err(|e| CliError::input(format!("bad value: {e}")))?,
        });
    }
    Ok(out)
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block() -> ForecastBlock {
        ForecastBlock {
            series_id: "a".into(),
            origin: NaiveDate::from_ymd_opt(2024, 2, 1).unwrap(),
            rho: "0.6".into(),
            paths: vec![vec![0, 2, 1], vec![3, 0, 0], vec![1, 1, 4]],
        }
    }

    #[test]
    fn forecast_samples_round_trip() {
        let f = tempfile::NamedTempFile::new().unwrap();
        let blocks = vec![block()];
        write_forecast_samples(f.path(), &blocks).unwrap();
        let back = read_forecast_samples(f.path()).unwrap();
        assert_eq!(blocks, back);
    }

    #[test]
    fn summary_quantiles_from_known_draws() {
        let f = tempfile::NamedTempFile::new().unwrap();
        write_forecast_summary(f.path(), &[block()]).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        // horizon 1 draws {0, 3, 1}: mean 4/3, median 1
        let h1: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(h1[3], "1");
        assert_eq!(h1[4], &format_f64(4.0 / 3.0));
        assert_eq!(h1[8], "1"); // q50
    }

    #[test]
    fn factor_draws_round_trip() {
        let draws = FactorDraws {
            factor: "phi".into(),
            origin: 42,
            draws: vec![vec![0.25, -0.5], vec![1.0, 0.125]],
        };
        let f = tempfile::NamedTempFile::new().unwrap();
        write_factor_draws(f.path(), &draws).unwrap();
        let back = read_factor_draws(f.path()).unwrap();
        assert_eq!(draws, back);
    }

    #[test]
    fn ragged_grids_rejected() {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(
            f.path(),
            "series_id,origin,rho,sample,horizon,value\n\
             a,2024-01-01,1,0,1,2\n\
             a,2024-01-01,1,1,2,3\n",
        )
        .unwrap();
        assert!(read_forecast_samples(f.path()).unwrap_err().to_string().contains("ragged"));
    }

    #[test]
    fn metrics_round_trip() {
        let rows = vec![MetricRow {
            series_id: "a".into(),
            rho: "0.4".into(),
            horizon: 3,
            metric: "mrps".into(),
            value: 0.125,
        }];
        let f = tempfile::NamedTempFile::new().unwrap();
        write_metrics(f.path(), &rows).unwrap();
        assert_eq!(read_metrics(f.path()).unwrap(), rows);
    }
}
