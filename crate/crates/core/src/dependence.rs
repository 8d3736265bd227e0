//! Temporal dependence of returns: session-aware autocorrelation, volatility
//! clustering, the leverage correlation and time-reversal asymmetry.
//!
//! All lagged statistics are built from explicit pair sets: a pair at lag
//! `k` exists only when both returns were observed exactly `k` base intervals
//! apart. Lags with an empty pair set are omitted, never zero-filled.
//!
//! Scaled values multiply a correlation by the square root of its own pair
//! count, so that +-3 is the 99% band for every lag.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{self, linear_fit, population_moments};
use crate::synth;
use crate::timeseries::{session_filter, ReturnSeries, SessionCalendar, Timestamp};

pub const DEFAULT_MAX_LAG: usize = 96;
pub const DEFAULT_LEVERAGE_MAX_LAG: usize = 96;
pub const DEFAULT_TRA_MAX_N: usize = 20;

/// Timestamp -> position lookup. Dense when every timestamp sits on one grid.
pub(crate) enum TimeIndex {
    Dense {
        origin: Timestamp,
        step: i64,
        slots: Vec<u32>,
    },
    Sparse(HashMap<Timestamp, u32>),
}

const EMPTY: u32 = u32::MAX;

impl TimeIndex {
    pub(crate) fn new(timestamps: &[Timestamp], step: i64) -> Self {
        let first = timestamps.first().copied().unwrap_or(0);
        let last = timestamps.last().copied().unwrap_or(0);
        let on_grid = timestamps.iter().all(|t| (t - first) % step == 0);
        let span = ((last - first) / step) as usize + 1;
        if on_grid && span <= 50_000_000 {
            let mut slots = vec![EMPTY; span];
            for (i, t) in timestamps.iter().enumerate() {
                slots[((t - first) / step) as usize] = i as u32;
            }
            TimeIndex::Dense {
                origin: first,
                step,
                slots,
            }
        } else {
            TimeIndex::Sparse(
                timestamps
                    .iter()
                    .enumerate()
                    .map(|(i, t)| (*t, i as u32))
                    .collect(),
            )
        }
    }

    pub(crate) fn get(&self, t: Timestamp) -> Option<usize> {
        match self {
            TimeIndex::Dense {
                origin,
                step,
                slots,
            } => {
                let d = t - origin;
                if d < 0 || d % step != 0 {
                    return None;
                }
                slots
                    .get((d / step) as usize)
                    .filter(|i| **i != EMPTY)
                    .map(|i| *i as usize)
            }
            TimeIndex::Sparse(map) => map.get(&t).map(|i| *i as usize),
        }
    }
}

/// Index pairs `(i, j)` with `t_j = t_i + offset`.
pub(crate) fn lagged_pairs(ts: &[Timestamp], index: &TimeIndex, offset: i64) -> Vec<(usize, usize)> {
    ts.iter()
        .enumerate()
        .filter_map(|(i, t)| index.get(t + offset).map(|j| (i, j)))
        .collect()
}

/// Pearson correlation of a pair set using the pair set's own means and
/// (1/N) standard deviations. `None` if either side is constant.
fn pair_correlation(pairs: &[(usize, usize)], x: &[f64], y: &[f64]) -> Option<f64> {
    let n = pairs.len() as f64;
    if pairs.len() < 2 {
        return None;
    }
    let (mut m1, mut m2) = (0.0, 0.0);
    for &(i, j) in pairs {
        m1 += x[i];
        m2 += y[j];
    }
    m1 /= n;
    m2 /= n;
    let (mut c, mut v1, mut v2) = (0.0, 0.0, 0.0);
    for &(i, j) in pairs {
        let a = x[i] - m1;
        let b = y[j] - m2;
        c += a * b;
        v1 += a * a;
        v2 += b * b;
    }
    if v1 <= 0.0 || v2 <= 0.0 {
        return None;
    }
    Some(c / (v1.sqrt() * v2.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfResult {
    /// lags in units of the return horizon
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    pub pair_counts: Vec<usize>,
    pub scaled_values: Vec<f64>,
    /// largest lag requested
    pub max_lag: usize,
    /// requested lags without a usable pair set
    pub omitted: Vec<usize>,
}

impl AcfResult {
    pub fn scaled_at(&self, lag: usize) -> Option<f64> {
        self.lags
            .binary_search(&lag)
            .ok()
            .map(|i| self.scaled_values[i])
    }

    pub fn value_at(&self, lag: usize) -> Option<f64> {
        self.lags.binary_search(&lag).ok().map(|i| self.values[i])
    }
}

/// Autocorrelation over in-session return pairs, lags `1..=max_lag`.
pub fn session_acf(
    returns: &ReturnSeries,
    calendar: &SessionCalendar,
    max_lag: usize,
) -> Result<AcfResult> {
    if max_lag == 0 {
        return Err(Error::InvalidInput("max_lag must be at least 1".into()));
    }
    if returns.is_empty() {
        return Err(Error::InsufficientData("empty return series".into()));
    }
    let filtered = session_filter(returns, calendar);
    let h = filtered.horizon_seconds();
    let ts: Vec<Timestamp> = filtered.timestamps().collect();
    let x = filtered.values();
    let index = TimeIndex::new(&ts, h);
    let mut out = AcfResult {
        lags: Vec::new(),
        values: Vec::new(),
        pair_counts: Vec::new(),
        scaled_values: Vec::new(),
        max_lag,
        omitted: Vec::new(),
    };
    for k in 1..=max_lag {
        let pairs = lagged_pairs(&ts, &index, k as i64 * h);
        match pair_correlation(&pairs, &x, &x) {
            Some(v) => {
                let n = pairs.len();
                out.lags.push(k);
                out.values.push(v);
                out.pair_counts.push(n);
                out.scaled_values.push(v * (n as f64).sqrt());
            }
            None => out.omitted.push(k),
        }
    }
    if out.lags.is_empty() {
        return Err(Error::InsufficientData(format!(
            "{}: no lag in 1..={max_lag} has a usable pair set",
            returns.asset_id()
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcfSummary {
    /// mean scaled ACF at lags 1 and 24
    pub avg_1_24: f64,
    /// mean scaled ACF over lags 2..=96 except 24, over the lags present
    pub avg_else: f64,
}

/// Lag 1 and lag 24 are required; the remaining lags 2..=96 are averaged
/// over those present, since session gaps legitimately remove some.
pub fn acf_summary(acf: &AcfResult) -> Result<AcfSummary> {
    if acf.max_lag < DEFAULT_MAX_LAG {
        return Err(Error::InvalidInput(format!(
            "ACF computed to lag {} but the summary needs lag {DEFAULT_MAX_LAG}",
            acf.max_lag
        )));
    }
    let missing: Vec<usize> = [1, 24]
        .into_iter()
        .filter(|k| acf.scaled_at(*k).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingLags(missing));
    }
    let else_vals: Vec<f64> = (2..=DEFAULT_MAX_LAG)
        .filter(|k| *k != 24)
        .filter_map(|k| acf.scaled_at(k))
        .collect();
    if else_vals.is_empty() {
        return Err(Error::MissingLags(
            (2..=DEFAULT_MAX_LAG).filter(|k| *k != 24).collect(),
        ));
    }
    Ok(AcfSummary {
        avg_1_24: 0.5 * (acf.scaled_at(1).unwrap() + acf.scaled_at(24).unwrap()),
        avg_else: stats::mean(&else_vals),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VolClusterConfig {
    pub min_lag: usize,
    pub max_lag: usize,
    /// lags whose scaled |R| autocorrelation is at or below this are left
    /// out of the regression; 0 keeps every positive lag
    pub min_scaled: f64,
    pub min_usable_lags: usize,
}

impl Default for VolClusterConfig {
    fn default() -> Self {
        Self {
            min_lag: 1,
            max_lag: DEFAULT_MAX_LAG,
            min_scaled: 3.0,
            min_usable_lags: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolClusterFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
    pub used_lags: Vec<usize>,
    pub excluded_lags: Vec<usize>,
    pub acf_abs: AcfResult,
}

/// Natural-log regression of the absolute-return ACF on the lag.
pub fn vol_cluster_fit(
    returns: &ReturnSeries,
    calendar: &SessionCalendar,
    config: &VolClusterConfig,
) -> Result<VolClusterFit> {
    let acf_abs = session_acf(&returns.abs(), calendar, config.max_lag)?;
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for (i, &k) in acf_abs.lags.iter().enumerate() {
        if k < config.min_lag {
            continue;
        }
        let v = acf_abs.values[i];
        if v > 0.0 && acf_abs.scaled_values[i] > config.min_scaled {
            used.push(k);
            lx.push((k as f64).ln());
            ly.push(v.ln());
        } else {
            excluded.push(k);
        }
    }
    if used.len() < config.min_usable_lags {
        return Err(Error::InsufficientData(format!(
            "{}: {} usable |R| ACF lags, need {}",
            returns.asset_id(),
            used.len(),
            config.min_usable_lags
        )));
    }
    let fit = linear_fit(&lx, &ly)?;
    Ok(VolClusterFit {
        slope: fit.slope,
        intercept: fit.intercept,
        slope_stderr: fit.slope_stderr,
        r_squared: fit.r_squared,
        used_lags: used,
        excluded_lags: excluded,
        acf_abs,
    })
}

/// Cross-correlation between returns and absolute returns.
///
/// Positive lags correlate past absolute returns with future returns;
/// negative lags correlate past returns with future absolute returns, so a
/// leverage effect shows up as negative values for `k < 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeverageCurve {
    pub lags: Vec<i64>,
    pub values: Vec<f64>,
    pub scaled_values: Vec<f64>,
    pub pair_counts: Vec<usize>,
}

pub fn leverage(returns: &ReturnSeries, max_lag: usize) -> Result<LeverageCurve> {
    let n = returns.len();
    if max_lag == 0 || n <= 2 * max_lag {
        return Err(Error::InsufficientData(format!(
            "leverage to lag {max_lag} needs more than {} returns, got {n}",
            2 * max_lag
        )));
    }
    let r = returns.values();
    let a: Vec<f64> = r.iter().map(|x| x.abs()).collect();
    let (mu_r, sd_r) = population_moments(&r);
    let (mu_a, sd_a) = population_moments(&a);
    if !(sd_r > 0.0 && sd_a > 0.0) {
        return Err(Error::Degenerate(format!(
            "{}: constant returns or absolute returns",
            returns.asset_id()
        )));
    }
    let h = returns.horizon_seconds();
    let ts: Vec<Timestamp> = returns.timestamps().collect();
    let index = TimeIndex::new(&ts, h);
    let mut curve = LeverageCurve {
        lags: Vec::new(),
        values: Vec::new(),
        scaled_values: Vec::new(),
        pair_counts: Vec::new(),
    };
    let k_max = max_lag as i64;
    for k in (-k_max..=k_max).filter(|k| *k != 0) {
        let pairs = lagged_pairs(&ts, &index, k.abs() * h);
        if pairs.is_empty() {
            continue;
        }
        let sum: f64 = if k > 0 {
            pairs.iter().map(|&(i, j)| (a[i] - mu_a) * (r[j] - mu_r)).sum()
        } else {
            pairs.iter().map(|&(i, j)| (r[i] - mu_r) * (a[j] - mu_a)).sum()
        };
        let cnt = pairs.len();
        let v = sum / cnt as f64 / (sd_a * sd_r);
        curve.lags.push(k);
        curve.values.push(v);
        curve.scaled_values.push(v * (cnt as f64).sqrt());
        curve.pair_counts.push(cnt);
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeverageSummary {
    pub avg_neg: f64,
    pub avg_pos: f64,
}

/// Mean scaled leverage on each branch.
pub fn leverage_summary(curve: &LeverageCurve) -> Result<LeverageSummary> {
    let branch = |neg: bool| -> Vec<f64> {
        curve
            .lags
            .iter()
            .zip(&curve.scaled_values)
            .filter(|(k, _)| (**k < 0) == neg)
            .map(|(_, v)| *v)
            .collect()
    };
    let neg = branch(true);
    let pos = branch(false);
    if neg.is_empty() || pos.is_empty() {
        return Err(Error::InsufficientData(
            "leverage curve lacks one of its branches".into(),
        ));
    }
    Ok(LeverageSummary {
        avg_neg: stats::mean(&neg),
        avg_pos: stats::mean(&pos),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraConfig {
    pub max_n: usize,
    pub min_returns_per_day: usize,
    pub min_days: usize,
    /// start of the trading day for continuous assets, seconds after 00:00 UTC
    pub day_offset_seconds: i64,
}

impl Default for TraConfig {
    fn default() -> Self {
        Self {
            max_n: DEFAULT_TRA_MAX_N,
            min_returns_per_day: 6,
            min_days: 60,
            day_offset_seconds: 0,
        }
    }
}

/// Daily coarse and fine volatility: |sum of intraday log-returns| and the
/// standard deviation of those returns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayMeasure {
    pub abs_return: f64,
    pub intraday_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraResult {
    /// k = 1..=max_n
    pub lags: Vec<usize>,
    /// C(k): |R| today against intraday volatility k days later
    pub c_pos: Vec<f64>,
    /// C(-k): |R| today against intraday volatility k days earlier
    pub c_neg: Vec<f64>,
    /// cumulative sum of C(k) - C(-k)
    pub delta: Vec<f64>,
    pub days_used: usize,
    /// time-reversal asymmetry present: delta(max_n) > delta(1)
    pub flagged: bool,
}

impl TraResult {
    pub fn initial(&self) -> f64 {
        self.delta[0]
    }

    pub fn last(&self) -> f64 {
        *self.delta.last().expect("non-empty delta")
    }
}

/// Per-day measures laid out densely by day index; `None` marks days
/// without data or with too few intraday returns.
pub fn daily_measures(
    returns: &ReturnSeries,
    calendar: &SessionCalendar,
    config: &TraConfig,
) -> Vec<Option<DayMeasure>> {
    let h = returns.horizon_seconds();
    let mut groups: Vec<(i64, Vec<f64>)> = Vec::new();
    if calendar.is_continuous() {
        for &(t, v) in returns.points() {
            let day = (t - h - config.day_offset_seconds).div_euclid(86_400);
            match groups.last_mut() {
                Some((d, vals)) if *d == day => vals.push(v),
                _ => groups.push((day, vec![v])),
            }
        }
    } else {
        // trading days are numbered consecutively in order of appearance
        let mut last_session = None;
        let mut ordinal = -1i64;
        for &(t, v) in returns.points() {
            let Some(sid) = calendar.session_for_interval(t - h, t) else {
                continue;
            };
            if last_session != Some(sid) {
                ordinal += 1;
                last_session = Some(sid);
                groups.push((ordinal, Vec::new()));
            }
            groups.last_mut().unwrap().1.push(v);
        }
    }
    let Some(first) = groups.first().map(|g| g.0) else {
        return Vec::new();
    };
    let last = groups.last().unwrap().0;
    let mut out = vec![None; (last - first + 1) as usize];
    for (d, vals) in groups {
        if vals.len() < config.min_returns_per_day {
            continue;
        }
        out[(d - first) as usize] = Some(DayMeasure {
            abs_return: vals.iter().sum::<f64>().abs(),
            intraday_std: stats::sample_std(&vals),
        });
    }
    out
}

/// C(+-k) and the cumulative difference from a dense day sequence.
pub fn tra_from_days(days: &[Option<DayMeasure>], max_n: usize) -> Result<TraResult> {
    let present: Vec<DayMeasure> = days.iter().flatten().copied().collect();
    let a: Vec<f64> = present.iter().map(|d| d.abs_return).collect();
    let s: Vec<f64> = present.iter().map(|d| d.intraday_std).collect();
    let (mu_a, sd_a) = population_moments(&a);
    let (mu_s, sd_s) = population_moments(&s);
    if !(sd_a > 0.0 && sd_s > 0.0) {
        return Err(Error::Degenerate("constant daily volatility measures".into()));
    }
    let corr = |k: i64| -> Option<f64> {
        let mut sum = 0.0;
        let mut cnt = 0usize;
        for (d, m) in days.iter().enumerate() {
            let Some(m) = m else { continue };
            let other = d as i64 + k;
            if other < 0 || other >= days.len() as i64 {
                continue;
            }
            if let Some(o) = &days[other as usize] {
                sum += (m.abs_return - mu_a) * (o.intraday_std - mu_s);
                cnt += 1;
            }
        }
        (cnt > 0).then(|| sum / cnt as f64 / (sd_a * sd_s))
    };
    let mut res = TraResult {
        lags: Vec::with_capacity(max_n),
        c_pos: Vec::with_capacity(max_n),
        c_neg: Vec::with_capacity(max_n),
        delta: Vec::with_capacity(max_n),
        days_used: present.len(),
        flagged: false,
    };
    let mut acc = 0.0;
    for k in 1..=max_n {
        let (Some(cp), Some(cn)) = (corr(k as i64), corr(-(k as i64))) else {
            return Err(Error::InsufficientData(format!(
                "no day pairs at TRA lag {k}"
            )));
        };
        acc += cp - cn;
        res.lags.push(k);
        res.c_pos.push(cp);
        res.c_neg.push(cn);
        res.delta.push(acc);
    }
    res.flagged = res.last() > res.initial();
    Ok(res)
}

/// Time-reversal asymmetry of daily coarse versus intraday volatility.
pub fn tra(returns: &ReturnSeries, calendar: &SessionCalendar, config: &TraConfig) -> Result<TraResult> {
    if config.max_n == 0 {
        return Err(Error::InvalidInput("TRA max_n must be at least 1".into()));
    }
    let days = daily_measures(returns, calendar, config);
    let used = days.iter().flatten().count();
    if used < config.min_days {
        return Err(Error::InsufficientData(format!(
            "{}: {used} complete days, need {}",
            returns.asset_id(),
            config.min_days
        )));
    }
    tra_from_days(&days, config.max_n)
}

/// Moving-block bootstrap standard error of each delta(N).
pub fn tra_bootstrap_stderr(
    returns: &ReturnSeries,
    calendar: &SessionCalendar,
    config: &TraConfig,
    trials: usize,
    block_len: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let days = daily_measures(returns, calendar, config);
    if days.iter().flatten().count() < config.min_days {
        return Err(Error::InsufficientData("too few days for TRA bootstrap".into()));
    }
    let block_len = block_len.clamp(1, days.len());
    let mut rng = synth::rng(seed);
    let mut draws: Vec<Vec<f64>> = Vec::with_capacity(trials);
    for _ in 0..trials {
        let mut sample = Vec::with_capacity(days.len());
        while sample.len() < days.len() {
            let start = rng.gen_range(0..=days.len() - block_len);
            sample.extend_from_slice(&days[start..start + block_len]);
        }
        sample.truncate(days.len());
        if let Ok(r) = tra_from_days(&sample, config.max_n) {
            draws.push(r.delta);
        }
    }
    if draws.len() < 2 {
        return Err(Error::InsufficientData("bootstrap produced no usable draws".into()));
    }
    Ok((0..config.max_n)
        .map(|i| {
            let col: Vec<f64> = draws.iter().map(|d| d[i]).collect();
            stats::sample_std(&col)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use crate::timeseries::SessionCalendar;

    fn series(v: &[f64]) -> ReturnSeries {
        ReturnSeries::from_values("X", 3600, 3600, v).unwrap()
    }

    #[test]
    fn ar1_acf_matches_phi_powers() {
        let v = synth::ar1(20_000, 0.5, 3);
        let acf = session_acf(&series(&v), &SessionCalendar::continuous(), 5).unwrap();
        for (i, k) in acf.lags.iter().enumerate() {
            let want = 0.5f64.powi(*k as i32);
            let tol = 3.0 / (acf.pair_counts[i] as f64).sqrt();
            assert!((acf.values[i] - want).abs() < tol, "lag {k}: {}", acf.values[i]);
        }
    }

    #[test]
    fn gaps_remove_pairs_and_lags() {
        // returns at hours 1,2,3 and 10,11: lag 5 has no pairs
        let pts = vec![(3600, 1.0), (7200, -1.0), (10800, 2.0), (36000, 0.5), (39600, -0.3)];
        let r = ReturnSeries::new("X", 3600, pts).unwrap();
        let acf = session_acf(&r, &SessionCalendar::continuous(), 9).unwrap();
        assert!(acf.omitted.contains(&5));
        assert!(acf.lags.contains(&1));
        assert_eq!(acf.pair_counts[0], 3);
    }

    #[test]
    fn spy_calendar_has_no_twelve_hour_pairs() {
        use chrono::TimeZone;
        let cal = SessionCalendar::us_equity([]);
        let tz = chrono_tz::America::New_York;
        let mut pts = Vec::new();
        let mut day = tz.with_ymd_and_hms(2023, 1, 2, 0, 0, 0).unwrap();
        let v = synth::gaussian(400 * 7, 5);
        let mut it = v.into_iter();
        for _ in 0..400 {
            // hourly closes 10:00..16:00 with the first candle opening at 9:00 filtered out
            for hh in 10..=16 {
                let t = day.with_time(chrono::NaiveTime::from_hms_opt(hh, 0, 0).unwrap()).unwrap();
                pts.push((t.timestamp(), it.next().unwrap()));
            }
            day += chrono::Duration::days(1);
        }
        let r = ReturnSeries::new("SPY", 3600, pts).unwrap();
        let acf = session_acf(&r, &cal, 48).unwrap();
        assert!(acf.omitted.contains(&12));
        assert!(acf.lags.contains(&1));
        assert!(acf.lags.contains(&24));
    }

    #[test]
    fn acf_summary_arithmetic() {
        let mut acf = AcfResult {
            lags: (1..=96).collect(),
            values: vec![0.0; 96],
            pair_counts: vec![100; 96],
            scaled_values: vec![0.0; 96],
            max_lag: 96,
            omitted: vec![],
        };
        let s = acf_summary(&acf).unwrap();
        assert_eq!((s.avg_1_24, s.avg_else), (0.0, 0.0));
        acf.scaled_values[0] = -5.0;
        acf.scaled_values[23] = -3.0;
        let s = acf_summary(&acf).unwrap();
        assert_eq!((s.avg_1_24, s.avg_else), (-4.0, 0.0));
    }

    #[test]
    fn acf_summary_missing_lags() {
        let acf = AcfResult {
            lags: (2..=96).filter(|k| *k != 24).collect(),
            values: vec![0.0; 94],
            pair_counts: vec![10; 94],
            scaled_values: vec![0.0; 94],
            max_lag: 96,
            omitted: vec![1, 24],
        };
        match acf_summary(&acf) {
            Err(Error::MissingLags(l)) => assert_eq!(l, vec![1, 24]),
            other => panic!("{other:?}"),
        }
        let short = AcfResult {
            max_lag: 48,
            ..acf
        };
        assert!(acf_summary(&short).is_err());
    }

    #[test]
    fn iid_acf_summary_within_band() {
        let v = synth::gaussian(50_000, 8);
        let acf = session_acf(&series(&v), &SessionCalendar::continuous(), 96).unwrap();
        let s = acf_summary(&acf).unwrap();
        assert!(s.avg_1_24.abs() < 3.0 && s.avg_else.abs() < 3.0, "{s:?}");
    }

    #[test]
    fn garch_vol_clustering_slope() {
        let v = synth::garch(100_000, 1e-6, 0.09, 0.9, 21);
        let fit = vol_cluster_fit(&series(&v), &SessionCalendar::continuous(), &VolClusterConfig::default())
            .unwrap();
        assert!((-0.4..=-0.05).contains(&fit.slope), "slope {}", fit.slope);
    }

    #[test]
    fn iid_noise_has_no_vol_clustering_fit() {
        let v = synth::gaussian(100_000, 21);
        let r = vol_cluster_fit(&series(&v), &SessionCalendar::continuous(), &VolClusterConfig::default());
        assert!(matches!(r, Err(Error::InsufficientData(_))), "{r:?}");
    }

    #[test]
    fn leverage_branch_orientation() {
        let v = synth::egarch(100_000, 0.98, 0.1, -0.08, 4);
        let curve = leverage(&series(&v), 48).unwrap();
        let s = leverage_summary(&curve).unwrap();
        assert!(s.avg_neg < -3.0, "{s:?}");
        assert!(s.avg_pos.abs() < 3.0, "{s:?}");
        assert_eq!(curve.lags.len(), 96);
        assert!(curve.lags.iter().all(|k| *k != 0));
    }

    #[test]
    fn leverage_summary_cases() {
        let curve = LeverageCurve {
            lags: vec![-2, -1, 1, 2],
            values: vec![0.0; 4],
            scaled_values: vec![-1.0, -3.0, 3.0, 1.0],
            pair_counts: vec![10; 4],
        };
        let s = leverage_summary(&curve).unwrap();
        assert_eq!((s.avg_neg, s.avg_pos), (-2.0, 2.0));
        let zeros = LeverageCurve {
            scaled_values: vec![0.0; 4],
            ..curve.clone()
        };
        let s = leverage_summary(&zeros).unwrap();
        assert_eq!((s.avg_neg, s.avg_pos), (0.0, 0.0));
        let one_sided = LeverageCurve {
            lags: vec![1, 2],
            values: vec![0.0; 2],
            scaled_values: vec![0.0; 2],
            pair_counts: vec![1; 2],
        };
        assert!(leverage_summary(&one_sided).is_err());
    }

    #[test]
    fn leverage_time_reversal_swaps_branches() {
        let v = synth::egarch(5_000, 0.95, 0.1, -0.1, 2);
        let r = series(&v);
        let fwd = leverage(&r, 20).unwrap();
        let rev = leverage(&r.time_reversed(), 20).unwrap();
        for (i, k) in fwd.lags.iter().enumerate() {
            let j = rev.lags.iter().position(|x| *x == -k).unwrap();
            assert!((fwd.values[i] - rev.values[j]).abs() < 1e-12);
            assert_eq!(fwd.pair_counts[i], rev.pair_counts[j]);
        }
    }

    #[test]
    fn leverage_needs_enough_data() {
        assert!(leverage(&series(&[0.1, -0.2, 0.3]), 2).is_err());
        assert!(matches!(leverage(&series(&[0.5; 10]), 2), Err(Error::Degenerate(_))));
    }

    #[test]
    fn correlations_are_scale_invariant() {
        let v = synth::egarch(5_000, 0.95, 0.1, -0.1, 9);
        let r = series(&v);
        let r2 = r.map_values(|x| 7.5 * x);
        let cal = SessionCalendar::continuous();
        let a = session_acf(&r, &cal, 10).unwrap();
        let b = session_acf(&r2, &cal, 10).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12);
        }
        let la = leverage(&r, 10).unwrap();
        let lb = leverage(&r2, 10).unwrap();
        for (x, y) in la.values.iter().zip(&lb.values) {
            assert!((x - y).abs() < 1e-12);
        }
        let cfg = TraConfig::default();
        let ta = tra(&r, &cal, &cfg).unwrap();
        let tb = tra(&r2, &cal, &cfg).unwrap();
        for (x, y) in ta.delta.iter().zip(&tb.delta) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn tra_recurrence_is_exact() {
        let v = synth::gaussian(24 * 200, 12);
        let t = tra(&series(&v), &SessionCalendar::continuous(), &TraConfig::default()).unwrap();
        assert_eq!(t.delta[0], t.c_pos[0] - t.c_neg[0]);
        for n in 1..t.delta.len() {
            assert_eq!(t.delta[n], t.delta[n - 1] + (t.c_pos[n] - t.c_neg[n]));
        }
        assert_eq!(t.lags, (1..=20).collect::<Vec<_>>());
    }

    #[test]
    fn tra_drops_sparse_days_and_requires_history() {
        let v = synth::gaussian(24 * 30, 1);
        assert!(tra(&series(&v), &SessionCalendar::continuous(), &TraConfig::default()).is_err());
        // 5 returns per day: every day dropped
        let pts: Vec<(i64, f64)> = (0..100)
            .flat_map(|d| (1..=5).map(move |h| (d * 86_400 + h * 3600, 0.01 * ((d + h) % 3) as f64)))
            .collect();
        let r = ReturnSeries::new("X", 3600, pts).unwrap();
        let days = daily_measures(&r, &SessionCalendar::continuous(), &TraConfig::default());
        assert!(days.iter().all(|d| d.is_none()));
    }

    #[test]
    fn day_measure_definition() {
        let v = [0.01, -0.02, 0.03, 0.0, 0.01, 0.02];
        let pts: Vec<(i64, f64)> = v.iter().enumerate().map(|(i, x)| ((i as i64 + 1) * 3600, *x)).collect();
        let r = ReturnSeries::new("X", 3600, pts).unwrap();
        let days = daily_measures(&r, &SessionCalendar::continuous(), &TraConfig::default());
        let d = days[0].unwrap();
        assert!((d.abs_return - 0.05).abs() < 1e-15);
        assert!((d.intraday_std - stats::sample_std(&v)).abs() < 1e-15);
    }
}
