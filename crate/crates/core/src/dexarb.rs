//! Pool-versus-reference price mechanics for fee-charging liquidity pools:
//! the fee-implied no-arbitrage band, the arbitrage projection, band
//! violations, an arbitrage-only pool simulator and lead-lag correlation.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dependence::{lagged_pairs, TimeIndex};
use crate::error::{Error, Result};
use crate::synth;
use crate::timeseries::{PriceSeries, ReturnSeries, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeeTier {
    fee_fraction: f64,
}

impl FeeTier {
    pub fn new(fee_fraction: f64) -> Result<Self> {
        if !(fee_fraction > 0.0 && fee_fraction < 0.1) {
            return Err(Error::InvalidInput(format!(
                "fee fraction must be in (0, 0.1), got {fee_fraction}"
            )));
        }
        Ok(Self { fee_fraction })
    }

    pub fn from_bps(bps: f64) -> Result<Self> {
        Self::new(bps / 10_000.0)
    }

    /// 30 basis points.
    pub fn bp30() -> Self {
        Self { fee_fraction: 0.003 }
    }

    /// 5 basis points.
    pub fn bp5() -> Self {
        Self {
            fee_fraction: 0.0005,
        }
    }

    pub fn fee_fraction(&self) -> f64 {
        self.fee_fraction
    }

    pub fn gamma(&self) -> f64 {
        1.0 - self.fee_fraction
    }

    /// `(gamma * s, s / gamma)`.
    pub fn band(&self, s: f64) -> (f64, f64) {
        let g = self.gamma();
        (g * s, s / g)
    }
}

/// Pool price after arbitrageurs trade against reference price `s`:
/// the projection of `z` onto `[gamma s, s / gamma]`.
pub fn optimal_pool_price(z: f64, s: f64, tier: FeeTier) -> Result<f64> {
    if !(z > 0.0 && s > 0.0) || !z.is_finite() || !s.is_finite() {
        return Err(Error::InvalidInput(format!(
            "prices must be positive and finite, got Z={z}, S={s}"
        )));
    }
    let (lo, hi) = tier.band(s);
    Ok(if z > hi {
        hi
    } else if z < lo {
        lo
    } else {
        z
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoArbBand {
    pub timestamps: Vec<Timestamp>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

pub fn no_arb_band(reference: &PriceSeries, tier: FeeTier) -> NoArbBand {
    let mut band = NoArbBand {
        timestamps: Vec::with_capacity(reference.len()),
        lower: Vec::with_capacity(reference.len()),
        upper: Vec::with_capacity(reference.len()),
    };
    for &(t, s) in reference.points() {
        let (lo, hi) = tier.band(s);
        band.timestamps.push(t);
        band.lower.push(lo);
        band.upper.push(hi);
    }
    band
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandSide {
    Above,
    Below,
}

impl BandSide {
    pub fn as_str(self) -> &'static str {
        match self {
            BandSide::Above => "above",
            BandSide::Below => "below",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandEvent {
    pub timestamp: Timestamp,
    pub side: BandSide,
    /// Z / boundary - 1: positive above the band, negative below it
    pub excess: f64,
}

fn align_prices<'a>(a: &'a PriceSeries, b: &'a PriceSeries) -> Vec<(Timestamp, f64, f64)> {
    let (pa, pb) = (a.points(), b.points());
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < pa.len() && j < pb.len() {
        match pa[i].0.cmp(&pb[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push((pa[i].0, pa[i].1, pb[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Timestamps where the pool price lies strictly outside the band around
/// the reference price. Touching a boundary is not a violation.
pub fn band_violations(pool: &PriceSeries, reference: &PriceSeries, tier: FeeTier) -> Result<Vec<BandEvent>> {
    let aligned = align_prices(pool, reference);
    if aligned.is_empty() {
        return Err(Error::InsufficientData(format!(
            "{} and {} share no timestamps",
            pool.asset_id(),
            reference.asset_id()
        )));
    }
    Ok(aligned
        .into_iter()
        .filter_map(|(t, z, s)| {
            let (lo, hi) = tier.band(s);
            if z > hi {
                Some(BandEvent {
                    timestamp: t,
                    side: BandSide::Above,
                    excess: z / hi - 1.0,
                })
            } else if z < lo {
                Some(BandEvent {
                    timestamp: t,
                    side: BandSide::Below,
                    excess: z / lo - 1.0,
                })
            } else {
                None
            }
        })
        .collect())
}

/// Optional non-arbitrage trading inside the band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandNoise {
    pub seed: u64,
    /// chance of a noise trade per step
    pub probability: f64,
    /// log-price standard deviation of a noise trade
    pub scale: f64,
}

/// Pool driven only by arbitrage against `reference`: starts at the first
/// reference price and is projected onto the band at every step. Noise
/// trades, when enabled, are clamped back inside the band.
pub fn simulate_arb_pool(reference: &PriceSeries, tier: FeeTier, noise: Option<BandNoise>) -> Result<PriceSeries> {
    let pts = reference.points();
    if pts.is_empty() {
        return Err(Error::InsufficientData("empty reference series".into()));
    }
    let mut rng = synth::rng(noise.map_or(0, |n| n.seed));
    let mut z = pts[0].1;
    let mut out = Vec::with_capacity(pts.len());
    out.push((pts[0].0, z));
    for &(t, s) in &pts[1..] {
        z = optimal_pool_price(z, s, tier)?;
        if let Some(n) = noise {
            if rng.gen::<f64>() < n.probability {
                let e: f64 = rng.sample(StandardNormal);
                z = optimal_pool_price(z * (n.scale * e).exp(), s, tier)?;
            }
        }
        out.push((t, z));
    }
    PriceSeries::new(
        format!("{}-pool", reference.asset_id()),
        reference.interval_seconds(),
        out,
    )
}

/// Number of steps at which the price differs from the previous one.
pub fn count_price_changes(series: &PriceSeries) -> usize {
    series
        .points()
        .windows(2)
        .filter(|w| w[1].1 != w[0].1)
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadLagCurve {
    pub lags: Vec<i64>,
    pub values: Vec<f64>,
    pub pair_counts: Vec<usize>,
    /// 1 / sqrt(pair count)
    pub stderr: Vec<f64>,
    pub centered: bool,
}

impl LeadLagCurve {
    pub fn value_at(&self, lag: i64) -> Option<f64> {
        self.lags.iter().position(|l| *l == lag).map(|i| self.values[i])
    }

    /// Whether |value| exceeds two standard errors at `lag`.
    pub fn significant_at(&self, lag: i64) -> Option<bool> {
        self.lags
            .iter()
            .position(|l| *l == lag)
            .map(|i| self.values[i].abs() > 2.0 * self.stderr[i])
    }

    /// Lag with the largest |value|.
    pub fn peak(&self) -> Option<(i64, f64)> {
        self.lags
            .iter()
            .zip(&self.values)
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(l, v)| (*l, *v))
    }
}

/// Cross-correlation `E[a(t) b(t+k)] / (sigma_a sigma_b)` for k in
/// `[-max_lag, max_lag]`; positive k means `a` leads `b`.
///
/// Uncentered mode uses raw products and root-mean-square scales, so a
/// series against itself gives exactly 1 at lag 0. Centered mode subtracts
/// full-sample means first. Both use the common timestamps only.
pub fn lead_lag_xcorr(a: &ReturnSeries, b: &ReturnSeries, max_lag: usize, centered: bool) -> Result<LeadLagCurve> {
    if a.horizon_seconds() != b.horizon_seconds() {
        return Err(Error::InvalidInput(format!(
            "horizons differ: {}s vs {}s",
            a.horizon_seconds(),
            b.horizon_seconds()
        )));
    }
    let step = a.horizon_seconds();
    let ib = TimeIndex::new(&b.timestamps().collect::<Vec<_>>(), step);
    let mut ts = Vec::new();
    let (mut xa, mut xb) = (Vec::new(), Vec::new());
    for &(t, v) in a.points() {
        if let Some(j) = ib.get(t) {
            ts.push(t);
            xa.push(v);
            xb.push(b.points()[j].1);
        }
    }
    if ts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} common timestamps",
            ts.len()
        )));
    }
    let scale = |x: &mut Vec<f64>, name: &str| -> Result<f64> {
        let n = x.len() as f64;
        if centered {
            let m = x.iter().sum::<f64>() / n;
            x.iter_mut().for_each(|v| *v -= m);
        }
        let s = (x.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
        if !(s > 0.0) {
            return Err(Error::Degenerate(format!("{name} returns are constant")));
        }
        Ok(s)
    };
    let sa = scale(&mut xa, a.asset_id())?;
    let sb = scale(&mut xb, b.asset_id())?;
    let index = TimeIndex::new(&ts, step);
    let k = max_lag as i64;
    let mut curve = LeadLagCurve {
        lags: Vec::new(),
        values: Vec::new(),
        pair_counts: Vec::new(),
        stderr: Vec::new(),
        centered,
    };
    for lag in -k..=k {
        let pairs = lagged_pairs(&ts, &index, lag * step);
        if pairs.is_empty() {
            continue;
        }
        let sum: f64 = pairs.iter().map(|&(i, j)| xa[i] * xb[j]).sum();
        let n = pairs.len();
        curve.lags.push(lag);
        curve.values.push(sum / n as f64 / (sa * sb));
        curve.pair_counts.push(n);
        curve.stderr.push(1.0 / (n as f64).sqrt());
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::log_returns;

    #[test]
    fn projection_cases() {
        let t = FeeTier::bp30();
        assert_eq!(optimal_pool_price(1000.0, 1000.0, t).unwrap(), 1000.0);
        assert!((optimal_pool_price(990.0, 1000.0, t).unwrap() - 997.0).abs() < 1e-9);
        let hi = optimal_pool_price(1010.0, 1000.0, t).unwrap();
        assert!((hi - 1003.009_027_081_243_7).abs() < 1e-9);
        assert!(optimal_pool_price(0.0, 1000.0, t).is_err());
        assert!(optimal_pool_price(1.0, -1.0, t).is_err());
    }

    #[test]
    fn tier_validation() {
        assert!(FeeTier::new(0.0).is_err());
        assert!(FeeTier::new(0.1).is_err());
        assert_eq!(FeeTier::from_bps(30.0).unwrap(), FeeTier::bp30());
    }

    #[test]
    fn band_width_and_nesting() {
        let s = PriceSeries::new("S", 60, vec![(0, 1000.0), (60, 1000.0)]).unwrap();
        let b30 = no_arb_band(&s, FeeTier::bp30());
        let b5 = no_arb_band(&s, FeeTier::bp5());
        let width = (b30.upper[0] - b30.lower[0]) / 1000.0;
        assert!((width - 0.006_009_027_081_243_7).abs() < 1e-12);
        assert!(b5.lower[0] > b30.lower[0] && b5.upper[0] < b30.upper[0]);
        assert_eq!(b30.lower[0], b30.lower[1]);
        let tiny = no_arb_band(&s, FeeTier::new(1e-12).unwrap());
        assert!((tiny.upper[0] - tiny.lower[0]).abs() < 1e-8);
    }

    #[test]
    fn violations_above_with_expected_excess() {
        let r = PriceSeries::new("S", 60, vec![(0, 100.0), (60, 101.0), (120, 99.0)]).unwrap();
        let pool = PriceSeries::new(
            "Z",
            60,
            r.points().iter().map(|(t, p)| (*t, p * 1.01)).collect(),
        )
        .unwrap();
        let ev = band_violations(&pool, &r, FeeTier::bp30()).unwrap();
        assert_eq!(ev.len(), 3);
        for e in &ev {
            assert_eq!(e.side, BandSide::Above);
            assert!((e.excess - (1.01 * 0.997 - 1.0)).abs() < 1e-12);
        }
        assert!(band_violations(&r, &r, FeeTier::bp30()).unwrap().is_empty());
        let other = PriceSeries::new("X", 60, vec![(600, 1.0)]).unwrap();
        assert!(band_violations(&other, &r, FeeTier::bp30()).is_err());
    }

    #[test]
    fn staircase_on_ramp() {
        let tier = FeeTier::bp30();
        let g = tier.gamma();
        let refs: Vec<(Timestamp, f64)> = (0..10).map(|i| (i * 60, 100.0 * 1.004f64.powi(i as i32))).collect();
        let r = PriceSeries::new("S", 60, refs.clone()).unwrap();
        let pool = simulate_arb_pool(&r, tier, None).unwrap();
        let mut z = refs[0].1;
        for (i, &(_, s)) in refs.iter().enumerate() {
            if i > 0 {
                z = if z < g * s { g * s } else if z > s / g { s / g } else { z };
            }
            assert_eq!(pool.points()[i].1, z);
        }
        // a ramp faster than the band width pins the pool to the lower edge
        assert_eq!(pool.points()[9].1, g * refs[9].1);
        let flat = PriceSeries::new("S", 60, (0..5).map(|i| (i * 60, 50.0)).collect()).unwrap();
        assert_eq!(count_price_changes(&simulate_arb_pool(&flat, tier, None).unwrap()), 0);
    }

    #[test]
    fn noise_stays_in_band() {
        let r = synth::gbm("S", 5000, 60, 0.001, 3).unwrap();
        let noise = BandNoise {
            seed: 5,
            probability: 0.3,
            scale: 0.002,
        };
        let pool = simulate_arb_pool(&r, FeeTier::bp5(), Some(noise)).unwrap();
        assert!(band_violations(&pool, &r, FeeTier::bp5()).unwrap().is_empty());
        assert!(count_price_changes(&pool) > count_price_changes(&simulate_arb_pool(&r, FeeTier::bp5(), None).unwrap()));
    }

    #[test]
    fn self_correlation_is_one() {
        let x = ReturnSeries::from_values("A", 600, 0, &synth::gaussian(500, 1)).unwrap();
        for centered in [false, true] {
            let c = lead_lag_xcorr(&x, &x, 5, centered).unwrap();
            assert!((c.value_at(0).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn swap_symmetry_is_exact() {
        let a = ReturnSeries::from_values("A", 600, 0, &synth::gaussian(400, 1)).unwrap();
        let b = ReturnSeries::from_values("B", 600, 0, &synth::gaussian(400, 2)).unwrap();
        let ab = lead_lag_xcorr(&a, &b, 10, false).unwrap();
        let ba = lead_lag_xcorr(&b, &a, 10, false).unwrap();
        for (i, lag) in ab.lags.iter().enumerate() {
            assert_eq!(ab.values[i], ba.value_at(-lag).unwrap());
        }
    }

    #[test]
    fn pool_follows_reference() {
        let r = synth::gbm("S", 60_000, 60, 0.001, 11).unwrap();
        let pool = simulate_arb_pool(&r, FeeTier::bp30(), None).unwrap();
        let ra = log_returns(&r, 600).unwrap();
        let rp = log_returns(&pool, 600).unwrap();
        let ten_min = |s: &ReturnSeries| s.filtered(|t| t % 600 == 0);
        let c = lead_lag_xcorr(&ten_min(&ra), &ten_min(&rp), 5, false).unwrap();
        assert!(c.value_at(0).unwrap() > 0.5);
        for lag in -5..0 {
            assert!(!c.significant_at(lag).unwrap());
        }
    }
}
