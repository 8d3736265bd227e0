//! Return distributions: empirical CDF branches, tail fits and the
//! Jarque-Bera normality scan across aggregation horizons.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::stats::{self, linear_fit};
use crate::timeseries::{log_returns, PriceSeries, ReturnSeries, Timestamp};

/// 95% quantile of the chi-square distribution with 2 degrees of freedom.
pub const JB_CRITICAL_95: f64 = 5.991;

pub const DEFAULT_TAIL_THRESHOLD_SIGMA: f64 = 2.0;
pub const DEFAULT_MIN_TAIL_POINTS: usize = 30;

/// Horizons in days: 1h, 4h, 12h, 1d, 2d, 4d, 7d, 14d, 30d.
pub const DEFAULT_JB_HORIZONS_DAYS: [f64; 9] = [
    1.0 / 24.0,
    4.0 / 24.0,
    0.5,
    1.0,
    2.0,
    4.0,
    7.0,
    14.0,
    30.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailModel {
    /// CDF tail ~ |x|^-alpha, fitted on (ln|x|, ln tail)
    Power,
    /// CDF tail ~ exp(-eta |x|), fitted on (|x|, ln tail)
    Exponential,
}

impl TailModel {
    pub fn as_str(self) -> &'static str {
        match self {
            TailModel::Power => "power",
            TailModel::Exponential => "exponential",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub side: Side,
    pub model: TailModel,
    pub threshold_sigma: f64,
    /// alpha for the power model, eta for the exponential model
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub intercept: f64,
    pub n_tail: usize,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JarqueBera {
    pub statistic: f64,
    pub p_value: f64,
    pub skewness: f64,
    /// fourth standardized moment (3 for a Gaussian)
    pub kurtosis: f64,
    pub n: usize,
}

/// JB statistic against aggregation horizon with a log10-log10 line fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JBScan {
    pub horizons_days: Vec<f64>,
    pub jb_values: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub critical_value_95: f64,
    /// horizons that could not be evaluated, with the reason
    pub dropped: Vec<(f64, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub x: f64,
    pub value: f64,
}

/// The two tail branches of the empirical CDF on a common positive axis:
/// `right` holds 1 - F(x) for x >= 0 and `left` holds F(-x) for the
/// negative samples flipped onto x > 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MountainCdf {
    pub n: usize,
    pub right: Vec<CdfPoint>,
    pub left: Vec<CdfPoint>,
}

impl MountainCdf {
    /// Binomial standard error of an empirical tail probability.
    pub fn stderr(&self, value: f64) -> f64 {
        (value * (1.0 - value) / self.n as f64).sqrt()
    }

    pub fn branch(&self, side: Side) -> &[CdfPoint] {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

pub fn jarque_bera(values: &[f64]) -> Result<JarqueBera> {
    let n = values.len();
    if n < 8 {
        return Err(Error::InsufficientData(format!(
            "Jarque-Bera needs at least 8 observations, got {n}"
        )));
    }
    let mean = stats::mean(values);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in values {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let nf = n as f64;
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    if !(m2 > 0.0) || m2 < f64::EPSILON * mean.abs().max(1.0).powi(2) {
        return Err(Error::Degenerate("zero variance in Jarque-Bera input".into()));
    }
    let skewness = m3 / m2.powf(1.5);
    let kurtosis = m4 / (m2 * m2);
    let statistic = nf / 6.0 * (skewness * skewness + 0.25 * (kurtosis - 3.0).powi(2));
    let chi2 = ChiSquared::new(2.0).expect("valid dof");
    let p_value = chi2.sf(statistic).clamp(0.0, 1.0);
    Ok(JarqueBera {
        statistic,
        p_value,
        skewness,
        kurtosis,
        n,
    })
}

/// Returns at `horizon` whose intervals do not overlap, chosen greedily from
/// the earliest.
pub fn non_overlapping_returns(prices: &PriceSeries, horizon_seconds: i64) -> Result<ReturnSeries> {
    let all = log_returns(prices, horizon_seconds)?;
    let mut last_end: Option<Timestamp> = None;
    let picked = all
        .points()
        .iter()
        .copied()
        .filter(|(t, _)| {
            let ok = last_end.is_none_or(|e| t - horizon_seconds >= e);
            if ok {
                last_end = Some(*t);
            }
            ok
        })
        .collect();
    ReturnSeries::new(prices.asset_id(), horizon_seconds, picked)
}

pub fn jb_scan(prices: &PriceSeries, horizons_days: &[f64]) -> Result<JBScan> {
    let mut kept_h = Vec::new();
    let mut kept_jb = Vec::new();
    let mut sizes = Vec::new();
    let mut dropped = Vec::new();
    for &days in horizons_days {
        let secs = (days * 86_400.0).round() as i64;
        if secs <= 0 || secs % prices.interval_seconds() != 0 {
            dropped.push((days, "horizon not a multiple of the sampling interval".to_string()));
            continue;
        }
        let outcome = non_overlapping_returns(prices, secs).and_then(|r| jarque_bera(&r.values()));
        match outcome {
            Ok(jb) if jb.statistic > 0.0 => {
                kept_h.push(days);
                kept_jb.push(jb.statistic);
                sizes.push(jb.n);
            }
            Ok(_) => dropped.push((days, "JB statistic is exactly zero".to_string())),
            Err(e) => dropped.push((days, e.to_string())),
        }
    }
    if kept_h.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{}: only {} usable JB horizons, need 3",
            prices.asset_id(),
            kept_h.len()
        )));
    }
    let lx: Vec<f64> = kept_h.iter().map(|h| h.log10()).collect();
    let ly: Vec<f64> = kept_jb.iter().map(|j| j.log10()).collect();
    let fit = linear_fit(&lx, &ly)?;
    Ok(JBScan {
        horizons_days: kept_h,
        jb_values: kept_jb,
        sample_sizes: sizes,
        slope: fit.slope,
        slope_stderr: fit.slope_stderr,
        intercept: fit.intercept,
        critical_value_95: JB_CRITICAL_95,
        dropped,
    })
}

pub fn mountain_cdf(norm_returns: &ReturnSeries) -> MountainCdf {
    mountain_cdf_values(&norm_returns.values())
}

pub fn mountain_cdf_values(values: &[f64]) -> MountainCdf {
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut right = Vec::new();
    let mut left = Vec::new();
    let mut i = 0;
    while i < n {
        let x = sorted[i];
        let mut j = i;
        while j < n && sorted[j] == x {
            j += 1;
        }
        // j = #{X <= x}
        if x >= 0.0 {
            right.push(CdfPoint {
                x,
                value: (n - j) as f64 / nf,
            });
        } else {
            left.push(CdfPoint {
                x: -x,
                value: j as f64 / nf,
            });
        }
        i = j;
    }
    left.reverse();
    MountainCdf { n, right, left }
}

pub fn fit_power_tail(norm_returns: &ReturnSeries, side: Side, threshold_sigma: f64) -> Result<TailFit> {
    fit_tail(
        &norm_returns.values(),
        side,
        TailModel::Power,
        threshold_sigma,
        DEFAULT_MIN_TAIL_POINTS,
    )
}

pub fn fit_exponential_tail(
    norm_returns: &ReturnSeries,
    side: Side,
    threshold_sigma: f64,
) -> Result<TailFit> {
    fit_tail(
        &norm_returns.values(),
        side,
        TailModel::Exponential,
        threshold_sigma,
        DEFAULT_MIN_TAIL_POINTS,
    )
}

/// Least-squares fit of the log empirical tail probability beyond
/// `threshold_sigma` sample standard deviations from zero. On normalized
/// input the threshold is in units of the normalized scale. Points whose
/// tail probability is zero (the extreme sample) carry no logarithm and are
/// skipped.
pub fn fit_tail(
    values: &[f64],
    side: Side,
    model: TailModel,
    threshold_sigma: f64,
    min_points: usize,
) -> Result<TailFit> {
    if !(threshold_sigma > 0.0) {
        return Err(Error::InvalidInput(format!(
            "tail threshold must be positive, got {threshold_sigma}"
        )));
    }
    if values.len() < 2 {
        return Err(Error::InsufficientData("tail fit needs a sample".into()));
    }
    let std = stats::sample_std(values);
    if !(std > 0.0) {
        return Err(Error::Degenerate("zero standard deviation".into()));
    }
    let threshold = threshold_sigma * std;
    let cdf = mountain_cdf_values(values);
    let (xs, ys): (Vec<f64>, Vec<f64>) = cdf
        .branch(side)
        .iter()
        .filter(|p| p.x > threshold && p.value > 0.0)
        .map(|p| {
            let x = match model {
                TailModel::Power => p.x.ln(),
                TailModel::Exponential => p.x,
            };
            (x, p.value.ln())
        })
        .unzip();
    if xs.len() < min_points.max(3) {
        return Err(Error::TooFewTailPoints {
            found: xs.len(),
            needed: min_points.max(3),
        });
    }
    let fit = linear_fit(&xs, &ys)?;
    let exponent = -fit.slope;
    if !exponent.is_finite() {
        return Err(Error::Degenerate("non-finite tail exponent".into()));
    }
    Ok(TailFit {
        side,
        model,
        threshold_sigma,
        exponent,
        exponent_stderr: fit.slope_stderr,
        intercept: fit.intercept,
        n_tail: xs.len(),
        r_squared: fit.r_squared,
    })
}
