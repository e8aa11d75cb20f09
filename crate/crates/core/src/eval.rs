//! Probabilistic forecast evaluation: highest-predictive-density
//! coverage, randomized PIT, binary calibration, scale-free accuracy
//! metrics and loss-optimal point forecasts for count predictives.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::special::RngStream;

/// Tail mass below which a predictive's support is considered exhausted.
const TAIL_TOL: f64 = 1e-10;

/// Minimum Monte Carlo sample size accepted as a predictive.
const MIN_SAMPLES: usize = 1000;

/// A predictive distribution over counts, either as explicit masses on
/// `0..=n` or as a Monte Carlo sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictive {
    Pmf(Vec<f64>),
    Samples(Vec<u32>),
}

impl Predictive {
    pub fn from_pmf(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::input("empty probability vector"));
        }
        let total: f64 = masses.iter().sum();
        if masses.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (total - 1.0).abs() > 1e-6 {
            return Err(Error::input(alloc::format!(
                "probability vector must be non-negative and sum to 1, got total {total}"
            )));
        }
        Ok(Predictive::Pmf(masses))
    }

    pub fn from_samples(samples: Vec<u32>) -> Result<Self> {
        if samples.len() < MIN_SAMPLES {
            return Err(Error::input(alloc::format!(
                "{} samples but at least {MIN_SAMPLES} required for a stable predictive",
                samples.len()
            )));
        }
        Ok(Predictive::Samples(samples))
    }

    /// Masses on `0..=max(support)`. Samples convert to their empirical
    /// frequencies.
    pub fn masses(&self) -> Vec<f64> {
        match self {
            Predictive::Pmf(m) => m.clone(),
            Predictive::Samples(s) => {
                let upper = s.iter().copied().max().unwrap_or(0) as usize;
                let mut out = vec![0.0; upper + 1];
                let w = 1.0 / s.len() as f64;
                for &y in s {
                    out[y as usize] += w;
                }
                out
            }
        }
    }

    pub fn pmf(&self, y: u32) -> f64 {
        match self {
            Predictive::Pmf(m) => m.get(y as usize).copied().unwrap_or(0.0),
            Predictive::Samples(s) => {
                s.iter().filter(|&&v| v == y).count() as f64 / s.len() as f64
            }
        }
    }

    pub fn cdf(&self, y: u32) -> f64 {
        match self {
            Predictive::Pmf(m) => m
                .iter()
                .take(y as usize + 1)
                .sum::<f64>()
                .min(1.0),
            Predictive::Samples(s) => {
                s.iter().filter(|&&v| v <= y).count() as f64 / s.len() as f64
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Predictive::Pmf(m) => m.iter().enumerate().map(|(y, p)| y as f64 * p).sum(),
            Predictive::Samples(s) => s.iter().map(|&y| y as f64).sum::<f64>() / s.len() as f64,
        }
    }

    /// Smallest `m` with `cdf(m) >= level`.
    pub fn quantile(&self, level: f64) -> u32 {
        let masses = self.masses();
        let mut acc = 0.0;
        for (y, &p) in masses.iter().enumerate() {
            acc += p;
            if acc >= level {
                return y as u32;
            }
        }
        masses.len() as u32 - 1
    }

    pub fn median(&self) -> u32 {
        self.quantile(0.5)
    }
}

/// One forecast paired with the count that materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    pub predictive: Predictive,
    pub observed: u32,
}

/// A highest-predictive-density set at some nominal level.
#[derive(Debug, Clone, PartialEq)]
pub struct HpdSet {
    pub members: Vec<u32>,
    /// Achieved mass: at least the nominal level, larger in general
    /// because discrete masses cannot be split.
    pub mass: f64,
    pub contiguous: bool,
}

/// Greedy HPD construction: add support points in decreasing order of
/// mass (ties broken toward the smaller count) until the nominal level
/// is reached.
pub fn hpd_set(masses: &[f64], level: f64) -> Result<HpdSet> {
    if !(0.0 < level && level < 1.0) {
        return Err(Error::input(alloc::format!("HPD level {level} outside (0, 1)")));
    }
    let mut order: Vec<usize> = (0..masses.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        masses[b].total_cmp(&masses[a]).then(a.cmp(&b))
    });
    let mut members = Vec::new();
    let mut mass = 0.0;
    for y in order {
        members.push(y as u32);
        mass += masses[y];
        if mass >= level {
            break;
        }
    }
    members.sort_unstable();
    let contiguous = members.windows(2).all(|w| w[1] == w[0] + 1);
    Ok(HpdSet { members, mass, contiguous })
}

/// Empirical coverage of nominal-level HPD sets over a batch of
/// forecasts.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageResult {
    pub level: f64,
    /// Fraction of observations falling inside their HPD set.
    pub empirical: f64,
    /// Mean achieved mass of the sets; the honest target for the
    /// empirical coverage under discreteness.
    pub mean_mass: f64,
    pub contiguous_fraction: f64,
    pub n: usize,
}

pub fn coverage(records: &[ForecastRecord], level: f64) -> Result<CoverageResult> {
    if records.is_empty() {
        return Err(Error::input("coverage needs at least one record"));
    }
    let mut hits = 0usize;
    let mut mass_sum = 0.0;
    let mut contiguous = 0usize;
    for rec in records {
        let set = hpd_set(&rec.predictive.masses(), level)?;
        if set.members.binary_search(&rec.observed).is_ok() {
            hits += 1;
        }
        mass_sum += set.mass;
        contiguous += set.contiguous as usize;
    }
    let n = records.len();
    Ok(CoverageResult {
        level,
        empirical: hits as f64 / n as f64,
        mean_mass: mass_sum / n as f64,
        contiguous_fraction: contiguous as f64 / n as f64,
        n,
    })
}

/// Randomized probability integral transform for discrete predictives:
/// `u ~ U(P(y - 1), P(y))` with `P(-1) = 0`. Under a calibrated model
/// the draws are iid uniform.
pub fn randomized_pit(records: &[ForecastRecord], rng: &mut RngStream) -> Result<Vec<f64>> {
    use rand::Rng;
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        let hi = rec.predictive.cdf(rec.observed);
        let lo = if rec.observed == 0 { 0.0 } else { rec.predictive.cdf(rec.observed - 1) };
        let u = if hi > lo {
            lo + (hi - lo) * rng.inner().random::<f64>()
        } else {
            // zero-probability observation: both bounds coincide
            hi
        };
        out.push(u);
    }
    Ok(out)
}

/// One-sample Kolmogorov-Smirnov test against U(0, 1): the statistic
/// and the asymptotic p-value.
pub fn ks_test_uniform(samples: &[f64]) -> Result<(f64, f64)> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::input("ks_test_uniform needs samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let mut d: f64 = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::input(alloc::format!("PIT value {u} outside [0, 1]")));
        }
        let lo = i as f64 / n as f64;
        let hi = (i + 1) as f64 / n as f64;
        d = d.max((u - lo).abs()).max((hi - u).abs());
    }
    let sqn = libm::sqrt(n as f64);
    let lambda = (sqn + 0.12 + 0.11 / sqn) * d;
    // Kolmogorov tail series
    let mut p = 0.0;
    for k in 1..=100 {
        let term = libm::exp(-2.0 * (k * k) as f64 * lambda * lambda);
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
        if term < 1e-16 {
            break;
        }
    }
    Ok((d, p.clamp(0.0, 1.0)))
}

/// One bin of a reliability table for binary forecasts.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationBin {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub mean_forecast: f64,
    pub frequency: f64,
    /// Wald 95% interval for the empirical frequency.
    pub wald: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTable {
    pub bins: Vec<CalibrationBin>,
}

/// Bins forecast probabilities into `n_bins` equal-width cells of
/// `[0, 1]` and compares mean forecast against empirical frequency.
pub fn binary_calibration(
    probs: &[f64],
    outcomes: &[bool],
    n_bins: usize,
) -> Result<CalibrationTable> {
    if probs.len() != outcomes.len() || probs.is_empty() {
        return Err(Error::input("calibration needs matching, non-empty inputs"));
    }
    if n_bins == 0 {
        return Err(Error::input("calibration needs at least one bin"));
    }
    let mut count = vec![0usize; n_bins];
    let mut p_sum = vec![0.0; n_bins];
    let mut hits = vec![0usize; n_bins];
    for (&p, &z) in probs.iter().zip(outcomes) {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::input(alloc::format!("forecast probability {p} outside [0, 1]")));
        }
        let b = ((p * n_bins as f64) as usize).min(n_bins - 1);
        count[b] += 1;
        p_sum[b] += p;
        hits[b] += z as usize;
    }
    let mut bins = Vec::with_capacity(n_bins);
    for b in 0..n_bins {
        let n = count[b];
        let freq = if n > 0 { hits[b] as f64 / n as f64 } else { f64::NAN };
        let half = if n > 0 {
            1.96 * libm::sqrt((freq * (1.0 - freq)).max(0.0) / n as f64)
        } else {
            f64::NAN
        };
        bins.push(CalibrationBin {
            lo: b as f64 / n_bins as f64,
            hi: (b + 1) as f64 / n_bins as f64,
            n,
            mean_forecast: if n > 0 { p_sum[b] / n as f64 } else { f64::NAN },
            frequency: freq,
            wald: (freq - half, freq + half),
        });
    }
    Ok(CalibrationTable { bins })
}

/// Scaled mean squared error for one series: mean of `(y - f)^2`
/// divided by the squared series mean. `None` when the series mean is
/// zero (the scale does not exist).
pub fn smse(point: &[f64], observed: &[u32]) -> Result<Option<f64>> {
    check_paired(point, observed)?;
    let ybar = observed.iter().map(|&y| y as f64).sum::<f64>() / observed.len() as f64;
    if ybar == 0.0 {
        return Ok(None);
    }
    let mse = point
        .iter()
        .zip(observed)
        .map(|(&f, &y)| (y as f64 - f) * (y as f64 - f))
        .sum::<f64>()
        / observed.len() as f64;
    Ok(Some(mse / (ybar * ybar)))
}

/// Mean absolute deviation of point forecasts from outcomes.
pub fn mad(point: &[f64], observed: &[u32]) -> Result<f64> {
    check_paired(point, observed)?;
    Ok(point
        .iter()
        .zip(observed)
        .map(|(&f, &y)| libm::fabs(y as f64 - f))
        .sum::<f64>()
        / observed.len() as f64)
}

fn check_paired(point: &[f64], observed: &[u32]) -> Result<()> {
    if point.len() != observed.len() || point.is_empty() {
        return Err(Error::input("metric needs matching, non-empty inputs"));
    }
    Ok(())
}

/// Ranked probability score of one predictive against one count:
/// `sum_j (P(j) - 1{y <= j})^2`, truncated once the upper tail mass
/// falls below `1e-10`.
pub fn rps(predictive: &Predictive, observed: u32) -> f64 {
    let masses = predictive.masses();
    let mut acc = 0.0;
    let mut cdf = 0.0;
    let upper = masses.len().max(observed as usize + 1);
    for j in 0..upper {
        cdf += masses.get(j).copied().unwrap_or(0.0);
        let step = (j as u32 >= observed) as u32 as f64;
        let d = cdf.min(1.0) - step;
        acc += d * d;
        if j as u32 >= observed && 1.0 - cdf < TAIL_TOL {
            break;
        }
    }
    acc
}

/// Mean ranked probability score over a batch.
pub fn mrps(records: &[ForecastRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::input("mrps needs at least one record"));
    }
    Ok(records.iter().map(|r| rps(&r.predictive, r.observed)).sum::<f64>() / records.len() as f64)
}

/// Loss functions with closed-form optimal point forecasts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    /// Squared error: optimum is the predictive mean.
    Squared,
    /// Absolute error: optimum is the predictive median.
    Absolute,
    /// Pinball loss at the given level: optimum is that quantile.
    Pinball(f64),
    /// Absolute percentage error `|y - f| / y` over `y >= 1`: optimum is
    /// the (-1)-median, the median of `g(y) proportional to p(y)/y`.
    Ape,
    /// Zero-adjusted APE: APE on `y >= 1` plus a linear penalty `c f`
    /// when `y = 0`.
    Zape(f64),
}

/// The loss-optimal point forecast under the given predictive.
pub fn point_forecast(predictive: &Predictive, loss: Loss) -> Result<f64> {
    let masses = predictive.masses();
    match loss {
        Loss::Squared => Ok(predictive.mean()),
        Loss::Absolute => Ok(predictive.median() as f64),
        Loss::Pinball(alpha) => {
            if !(0.0 < alpha && alpha < 1.0) {
                return Err(Error::input(alloc::format!("pinball level {alpha} outside (0, 1)")));
            }
            Ok(predictive.quantile(alpha) as f64)
        }
        Loss::Ape => inverse_weighted_median(&masses, 0.0),
        Loss::Zape(c) => {
            if !(c >= 0.0) {
                return Err(Error::input(alloc::format!("zape penalty rate {c} must be >= 0")));
            }
            inverse_weighted_median(&masses, c * masses.first().copied().unwrap_or(0.0))
        }
    }
}

/// The minimizer of `penalty * f + sum_{y >= 1} p(y) |y - f| / y`: zero
/// if the penalty dominates, else the smallest `m >= 1` with
/// `sum_{1 <= y <= m} p(y)/y >= (S - penalty) / 2` where `S` is the
/// total inverse-weighted mass.
fn inverse_weighted_median(masses: &[f64], penalty: f64) -> Result<f64> {
    let s: f64 = masses
        .iter()
        .enumerate()
        .skip(1)
        .map(|(y, &p)| p / y as f64)
        .sum();
    if s == 0.0 || penalty >= s {
        return Ok(0.0);
    }
    let target = (s - penalty) / 2.0;
    let mut acc = 0.0;
    for (y, &p) in masses.iter().enumerate().skip(1) {
        acc += p / y as f64;
        if acc >= target {
            return Ok(y as f64);
        }
    }
    Ok(masses.len() as f64 - 1.0)
}
