//! CSV ingestion and validation for multi-series count data.
//!
//! Schema: `series_id,date,count[,covariate...]`. Dates are ISO-8601 at
//! daily granularity and must be contiguous within each series; a count
//! of `missing` marks an explicit gap (the filter evolves without
//! updating there). Unknown gaps, duplicate `(series_id, date)` pairs
//! and malformed cells are rejected with row-level diagnostics.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use dcmm_core::dglm::Covariates;

use crate::errors::{CliError, Result};

pub const MISSING: &str = "missing";

/// One series: observed counts and covariate columns on a contiguous
/// daily index starting at `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesData {
    pub id: String,
    pub start: NaiveDate,
    /// `None` marks an explicitly missing count.
    pub counts: Vec<Option<u32>>,
    pub covariates: BTreeMap<String, Vec<f64>>,
}

impl SeriesData {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn date_at(&self, t: usize) -> NaiveDate {
        self.start + chrono::Days::new(t as u64)
    }

    pub fn end(&self) -> NaiveDate {
        self.date_at(self.len().saturating_sub(1))
    }

    /// Covariate map for one time index, as the model layer expects.
    pub fn covariates_at(&self, t: usize) -> Covariates {
        self.covariates
            .iter()
            .map(|(name, col)| (name.clone(), col[t]))
            .collect()
    }
}

/// A validated batch of series sharing one covariate schema.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub covariate_names: Vec<String>,
    pub series: BTreeMap<String, SeriesData>,
}

impl SeriesTable {
    pub fn n_series(&self) -> usize {
        self.series.len()
    }

    /// Series ids in their stable (sorted) processing order.
    pub fn ids(&self) -> Vec<String> {
        self.series.keys().cloned().collect()
    }
}

struct RawRow {
    line: u64,
    date: NaiveDate,
    count: Option<u32>,
    covariates: Vec<f64>,
}

/// Result of a lenient load: validated series plus per-series
/// diagnostics for the series whose rows failed validation. Batch-level
/// problems (unreadable file, bad header) are still hard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadOutcome {
    pub table: SeriesTable,
    /// series id -> first diagnostic for that series.
    pub failures: BTreeMap<String, String>,
}

/// Reads a series table, isolating row-level problems to the series they
/// belong to so one corrupt series never sinks the batch.
pub fn read_series_table_partial(path: &Path) -> Result<LoadOutcome> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 3 || cols[0] != "series_id" || cols[1] != "date" || cols[2] != "count" {
        return Err(CliError::input(format!(
            "{}: header must start with series_id,date,count (got {:?})",
            path.display(),
            cols
        )));
    }
    let covariate_names: Vec<String> = cols[3..].iter().map(|s| s.to_string()).collect();

    let mut rows: BTreeMap<String, Vec<RawRow>> = BTreeMap::new();
    let mut failures: BTreeMap<String, String> = BTreeMap::new();
    let fail = |failures: &mut BTreeMap<String, String>, id: String, line: u64, msg: String| {
        failures
            .entry(id)
            .or_insert_with(|| format!("{}:{line}: {msg}", path.display()));
    };
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2; // header is line 1
        let record = record?;
        if record.is_empty() || record[0].is_empty() {
            return Err(CliError::input(format!(
                "{}:{line}: row without a series_id",
                path.display()
            )));
        }
        let id = record[0].to_string();
        if record.len() != cols.len() {
            fail(
                &mut failures,
                id,
                line,
                format!("expected {} fields, got {}", cols.len(), record.len()),
            );
            continue;
        }
        let date = match NaiveDate::parse_from_str(&record[1], "%Y-%m-%d") {
            Ok(d) => d,
            Err(e) => {
                fail(&mut failures, id, line, format!("bad date '{}': {e}", &record[1]));
                continue;
            }
        };
        let count = if &record[2] == MISSING {
            None
        } else {
            match record[2].parse::<u32>() {
                Ok(c) => Some(c),
                Err(e) => {
                    fail(&mut failures, id, line, format!("bad count '{}': {e}", &record[2]));
                    continue;
                }
            }
        };
        let mut covariates = Vec::with_capacity(covariate_names.len());
        let mut row_ok = true;
        for (j, name) in covariate_names.iter().enumerate() {
            let cell = &record[3 + j];
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => covariates.push(v),
                _ => {
                    fail(
                        &mut failures,
                        id.clone(),
                        line,
                        format!("bad value '{cell}' for covariate {name}"),
                    );
                    row_ok = false;
                    break;
                }
            }
        }
        if !row_ok {
            continue;
        }
        rows.entry(id).or_default().push(RawRow { line, date, count, covariates });
    }
    if rows.is_empty() && failures.is_empty() {
        return Err(CliError::input(format!("{}: no data rows", path.display())));
    }

    let mut series = BTreeMap::new();
    'next_series: for (id, mut rs) in rows {
        if failures.contains_key(&id) {
            continue; // a bad row already disqualified this series
        }
        rs.sort_by_key(|r| r.date);
        for w in rs.windows(2) {
            if w[1].date == w[0].date {
                fail(
                    &mut failures,
                    id.clone(),
                    w[1].line,
                    format!("duplicate ({id}, {})", w[1].date),
                );
                continue 'next_series;
            }
            if w[1].date != w[0].date + chrono::Days::new(1) {
                fail(
                    &mut failures,
                    id.clone(),
                    w[1].line,
                    format!(
                        "gap between {} and {} (mark counts as `{MISSING}` instead of \
                         omitting days)",
                        w[0].date, w[1].date
                    ),
                );
                continue 'next_series;
            }
        }
        let start = rs[0].date;
        let counts = rs.iter().map(|r| r.count).collect();
        let mut covariates: BTreeMap<String, Vec<f64>> = covariate_names
            .iter()
            .map(|n| (n.clone(), Vec::with_capacity(rs.len())))
            .collect();
        for r in &rs {
            for (name, &v) in covariate_names.iter().zip(&r.covariates) {
                covariates.get_mut(name).unwrap().push(v);
            }
        }
        series.insert(id.clone(), SeriesData { id, start, counts, covariates });
    }
    Ok(LoadOutcome { table: SeriesTable { covariate_names, series }, failures })
}

/// Strict load: any row-level problem is an error.
pub fn read_series_table(path: &Path) -> Result<SeriesTable> {
    let outcome = read_series_table_partial(path)?;
    if let Some((id, diag)) = outcome.failures.iter().next() {
        return Err(CliError::input(format!("series {id}: {diag}")));
    }
    Ok(outcome.table)
}

/// Writes a series table in the same schema `read_series_table` accepts.
pub fn write_series_table(path: &Path, table: &SeriesTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut header = vec!["series_id".to_string(), "date".into(), "count".into()];
    header.extend(table.covariate_names.iter().cloned());
    w.write_record(&header)?;
    for s in table.series.values() {
        for t in 0..s.len() {
            let mut rec = vec![
                s.id.clone(),
                s.date_at(t).format("%Y-%m-%d").to_string(),
                match s.counts[t] {
                    Some(c) => c.to_string(),
                    None => MISSING.to_string(),
                },
            ];
            for name in &table.covariate_names {
                rec.push(format_f64(s.covariates[name][t]));
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Shortest round-trip decimal rendering, the one float format used in
/// every emitted file (so reruns are byte-comparable).
pub fn format_f64(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        // keep integral values compact and unambiguous
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}
