//! Price and return series, resampling, normalization and perturbation
//! utilities shared by every analysis module.
//!
//! Timestamps are UTC epoch seconds. Missing observations are never filled:
//! a return exists only when both of its endpoints were observed.

mod calendar;

pub use calendar::{SessionCalendar, SessionId, SessionRule};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

pub type Timestamp = i64;

/// Prices sampled on a fixed grid of `interval_seconds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    asset_id: String,
    interval_seconds: i64,
    points: Vec<(Timestamp, f64)>,
}

impl PriceSeries {
    pub fn new(
        asset_id: impl Into<String>,
        interval_seconds: i64,
        points: Vec<(Timestamp, f64)>,
    ) -> Result<Self> {
        if interval_seconds <= 0 {
            return Err(Error::InvalidInput(format!(
                "interval must be positive, got {interval_seconds}"
            )));
        }
        if let Some(&(t0, _)) = points.first() {
            let phase = t0.rem_euclid(interval_seconds);
            for w in points.windows(2) {
                if w[1].0 <= w[0].0 {
                    return Err(Error::InvalidInput(format!(
                        "timestamps not strictly increasing at {}",
                        w[1].0
                    )));
                }
            }
            for &(t, p) in &points {
                if t.rem_euclid(interval_seconds) != phase {
                    return Err(Error::InvalidInput(format!(
                        "timestamp {t} is off the {interval_seconds}s grid"
                    )));
                }
                if !(p.is_finite() && p > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "non-positive price {p} at {t}"
                    )));
                }
            }
        }
        Ok(Self {
            asset_id: asset_id.into(),
            interval_seconds,
            points,
        })
    }

    pub fn asset_id(&self) -> &str {
        &self.asset_id
    }

    pub fn interval_seconds(&self) -> i64 {
        self.interval_seconds
    }

    pub fn points(&self) -> &[(Timestamp, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn price_at(&self, t: Timestamp) -> Option<f64> {
        self.points
            .binary_search_by_key(&t, |p| p.0)
            .ok()
            .map(|i| self.points[i].1)
    }

    /// Keeps observations with `from <= t < to`.
    pub fn window(&self, from: Option<Timestamp>, to: Option<Timestamp>) -> Self {
        let points = self
            .points
            .iter()
            .copied()
            .filter(|(t, _)| from.is_none_or(|f| *t >= f) && to.is_none_or(|e| *t < e))
            .collect();
        Self {
            asset_id: self.asset_id.clone(),
            interval_seconds: self.interval_seconds,
            points,
        }
    }
}

/// Normalization constants recorded on a z-scored series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: f64,
    pub std: f64,
}

/// Log-returns over `horizon_seconds`, stamped at the end of each interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    asset_id: String,
    horizon_seconds: i64,
    points: Vec<(Timestamp, f64)>,
    normalization: Option<Normalization>,
}

impl ReturnSeries {
    pub fn new(
        asset_id: impl Into<String>,
        horizon_seconds: i64,
        points: Vec<(Timestamp, f64)>,
    ) -> Result<Self> {
        if horizon_seconds <= 0 {
            return Err(Error::InvalidInput(format!(
                "horizon must be positive, got {horizon_seconds}"
            )));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidInput(format!(
                    "timestamps not strictly increasing at {}",
                    w[1].0
                )));
            }
        }
        if let Some(&(t, v)) = points.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite return {v} at {t}")));
        }
        Ok(Self {
            asset_id: asset_id.into(),
            horizon_seconds,
            points,
            normalization: None,
        })
    }

    /// Builds a gapless series on a regular grid starting at `start`.
    pub fn from_values(
        asset_id: impl Into<String>,
        horizon_seconds: i64,
        start: Timestamp,
        values: &[f64],
    ) -> Result<Self> {
        let points = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (start + i as i64 * horizon_seconds, v))
            .collect();
        Self::new(asset_id, horizon_seconds, points)
    }

    pub fn asset_id(&self) -> &str {
        &self.asset_id
    }

    pub fn horizon_seconds(&self) -> i64 {
        self.horizon_seconds
    }

    pub fn points(&self) -> &[(Timestamp, f64)] {
        &self.points
    }

    pub fn timestamps(&self) -> impl Iterator<Item = Timestamp> + '_ {
        self.points.iter().map(|p| p.0)
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalization.is_some()
    }

    pub fn normalization(&self) -> Option<Normalization> {
        self.normalization
    }

    /// Same timestamps, values mapped through `f`. Drops normalization.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            asset_id: self.asset_id.clone(),
            horizon_seconds: self.horizon_seconds,
            points: self.points.iter().map(|&(t, v)| (t, f(v))).collect(),
            normalization: None,
        }
    }

    pub fn abs(&self) -> Self {
        self.map_values(f64::abs)
    }

    /// Mirror the series in time: value order reversed, timestamps kept.
    pub fn time_reversed(&self) -> Self {
        let ts: Vec<Timestamp> = self.timestamps().collect();
        let first = ts.first().copied().unwrap_or(0);
        let last = ts.last().copied().unwrap_or(0);
        let mut points: Vec<(Timestamp, f64)> = self
            .points
            .iter()
            .map(|&(t, v)| (first + last - t, v))
            .collect();
        points.reverse();
        Self {
            asset_id: self.asset_id.clone(),
            horizon_seconds: self.horizon_seconds,
            points,
            normalization: None,
        }
    }

    pub fn window(&self, from: Option<Timestamp>, to: Option<Timestamp>) -> Self {
        let points = self
            .points
            .iter()
            .copied()
            .filter(|(t, _)| from.is_none_or(|f| *t >= f) && to.is_none_or(|e| *t < e))
            .collect();
        Self {
            asset_id: self.asset_id.clone(),
            horizon_seconds: self.horizon_seconds,
            points,
            normalization: None,
        }
    }

    /// Keeps the points whose timestamp passes `keep`.
    pub fn filtered(&self, keep: impl Fn(Timestamp) -> bool) -> Self {
        Self {
            asset_id: self.asset_id.clone(),
            horizon_seconds: self.horizon_seconds,
            points: self.points.iter().copied().filter(|(t, _)| keep(*t)).collect(),
            normalization: self.normalization,
        }
    }
}

/// Log-returns `ln p(T) - ln p(T - horizon)` for every pair of observations
/// exactly one horizon apart.
pub fn log_returns(series: &PriceSeries, horizon_seconds: i64) -> Result<ReturnSeries> {
    let interval = series.interval_seconds();
    if horizon_seconds <= 0 || horizon_seconds % interval != 0 {
        return Err(Error::InvalidInput(format!(
            "horizon {horizon_seconds}s is not a positive multiple of the {interval}s interval"
        )));
    }
    let pts = series.points();
    let mut out = Vec::with_capacity(pts.len());
    // Two-pointer scan: `left` trails at T - horizon.
    let mut left = 0usize;
    for &(t, p) in pts {
        let target = t - horizon_seconds;
        while left < pts.len() && pts[left].0 < target {
            left += 1;
        }
        if left < pts.len() && pts[left].0 == target {
            out.push((t, p.ln() - pts[left].1.ln()));
        }
    }
    if out.is_empty() {
        return Err(Error::InsufficientData(format!(
            "{}: no observation pairs {horizon_seconds}s apart",
            series.asset_id()
        )));
    }
    ReturnSeries::new(series.asset_id(), horizon_seconds, out)
}

/// Z-scores a series with its full-sample mean and n-1 standard deviation.
pub fn normalize(returns: &ReturnSeries) -> Result<ReturnSeries> {
    if returns.len() < 2 {
        return Err(Error::InsufficientData(
            "normalization needs at least 2 returns".into(),
        ));
    }
    let values = returns.values();
    let mean = stats::mean(&values);
    let std = stats::sample_std(&values);
    if !(std > 0.0) {
        return Err(Error::Degenerate(format!(
            "{}: zero standard deviation",
            returns.asset_id()
        )));
    }
    let mut out = returns.map_values(|x| (x - mean) / std);
    out.normalization = Some(Normalization { mean, std });
    Ok(out)
}

/// Fraction of returns with `|x| <= tolerance`.
pub fn zero_fraction(returns: &ReturnSeries, tolerance: f64) -> Result<f64> {
    if returns.is_empty() {
        return Err(Error::InsufficientData("empty return series".into()));
    }
    let zeros = returns
        .points()
        .iter()
        .filter(|(_, v)| v.abs() <= tolerance)
        .count();
    Ok(zeros as f64 / returns.len() as f64)
}

/// Keeps returns whose interval `[T - horizon, T]` lies inside one session.
pub fn session_filter(returns: &ReturnSeries, calendar: &SessionCalendar) -> ReturnSeries {
    if calendar.is_continuous() {
        return returns.clone();
    }
    let h = returns.horizon_seconds();
    returns.filtered(|t| calendar.session_for_interval(t - h, t).is_some())
}

/// Sets exactly `round(rate * n)` uniformly chosen positions to zero.
pub fn random_zero_replacement(returns: &ReturnSeries, rate: f64, seed: u64) -> Result<ReturnSeries> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidInput(format!("replacement rate {rate} outside [0, 1]")));
    }
    let n = returns.len();
    let k = (rate * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, n, k.min(n));
    let mut points = returns.points.clone();
    for i in chosen.iter() {
        points[i].1 = 0.0;
    }
    Ok(ReturnSeries {
        asset_id: returns.asset_id.clone(),
        horizon_seconds: returns.horizon_seconds,
        points,
        normalization: None,
    })
}

/// Down-samples to `interval_seconds` buckets (epoch aligned), keeping the
/// last observed price in each bucket, stamped at the bucket start.
pub fn resample_last(series: &PriceSeries, interval_seconds: i64) -> Result<PriceSeries> {
    let src = series.interval_seconds();
    if interval_seconds < src || interval_seconds % src != 0 {
        return Err(Error::InvalidInput(format!(
            "target interval {interval_seconds}s is not a multiple of the {src}s source interval"
        )));
    }
    if interval_seconds == src {
        return Ok(series.clone());
    }
    let mut out: Vec<(Timestamp, f64)> = Vec::new();
    for &(t, p) in series.points() {
        let bucket = t.div_euclid(interval_seconds) * interval_seconds;
        match out.last_mut() {
            Some(last) if last.0 == bucket => last.1 = p,
            _ => out.push((bucket, p)),
        }
    }
    PriceSeries::new(series.asset_id(), interval_seconds, out)
}
