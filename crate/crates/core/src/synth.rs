//! Seeded synthetic return and price generators.
//!
//! Used by the test suites and for pipeline smoke runs. Every generator is
//! deterministic in its seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use crate::error::Result;
use crate::timeseries::{PriceSeries, Timestamp};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

pub fn student_t(n: usize, dof: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let t = StudentT::new(dof).expect("positive degrees of freedom");
    (0..n).map(|_| t.sample(&mut r)).collect()
}

/// AR(1): x_t = phi * x_{t-1} + e_t with standard-normal innovations.
pub fn ar1(n: usize, phi: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let mut x = 0.0;
    // burn-in so the start is stationary
    for _ in 0..200 {
        x = phi * x + r.sample::<f64, _>(StandardNormal);
    }
    (0..n)
        .map(|_| {
            x = phi * x + r.sample::<f64, _>(StandardNormal);
            x
        })
        .collect()
}

/// GARCH(1,1) with Gaussian innovations:
/// sigma2_t = omega + alpha * r_{t-1}^2 + beta * sigma2_{t-1}.
pub fn garch(n: usize, omega: f64, alpha: f64, beta: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let mut var = omega / (1.0 - alpha - beta).max(1e-6);
    let mut prev = 0.0;
    let burn = 1000;
    let mut out = Vec::with_capacity(n);
    for i in 0..n + burn {
        var = omega + alpha * prev * prev + beta * var;
        let z: f64 = r.sample(StandardNormal);
        prev = var.sqrt() * z;
        if i >= burn {
            out.push(prev);
        }
    }
    out
}

/// EGARCH-style asymmetric volatility: negative returns raise the next
/// log-variance, positive returns do not.
///
/// ln sigma2_t = omega + beta * ln sigma2_{t-1} + gamma * z_{t-1} + alpha * (|z_{t-1}| - E|z|)
/// with `gamma < 0` giving the leverage effect.
pub fn egarch(n: usize, beta: f64, alpha: f64, gamma: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let mean_abs_z = (2.0 / std::f64::consts::PI).sqrt();
    let mut log_var = 0.0;
    let mut z_prev = 0.0f64;
    let burn = 1000;
    let mut out = Vec::with_capacity(n);
    for i in 0..n + burn {
        log_var = beta * log_var + gamma * z_prev + alpha * (z_prev.abs() - mean_abs_z);
        let z: f64 = r.sample(StandardNormal);
        if i >= burn {
            out.push((0.5 * log_var).exp() * z);
        }
        z_prev = z;
    }
    out
}

/// Symmetric two-sided Pareto: sign * U^{-1/alpha}, so P(|X| > x) = x^{-alpha}
/// for x >= 1.
pub fn symmetric_pareto(n: usize, alpha: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let u: f64 = 1.0 - r.gen::<f64>();
            let mag = u.powf(-1.0 / alpha);
            if r.gen::<bool>() {
                mag
            } else {
                -mag
            }
        })
        .collect()
}

/// Laplace with unit scale via inverse CDF.
pub fn laplace(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let u: f64 = r.gen::<f64>() - 0.5;
            -u.signum() * (1.0 - 2.0 * u.abs()).ln()
        })
        .collect()
}

/// Prices on a regular grid from a start price and log-returns.
pub fn prices_from_returns(
    asset_id: &str,
    interval_seconds: i64,
    start: Timestamp,
    start_price: f64,
    returns: &[f64],
) -> Result<PriceSeries> {
    let mut p = start_price;
    let mut pts = Vec::with_capacity(returns.len() + 1);
    pts.push((start, p));
    for (i, r) in returns.iter().enumerate() {
        p *= r.exp();
        pts.push((start + (i as i64 + 1) * interval_seconds, p));
    }
    PriceSeries::new(asset_id, interval_seconds, pts)
}

/// Geometric Brownian motion sampled every `interval_seconds`;
/// `sigma` is the per-step log-return volatility.
pub fn gbm(
    asset_id: &str,
    n_steps: usize,
    interval_seconds: i64,
    sigma: f64,
    seed: u64,
) -> Result<PriceSeries> {
    let steps: Vec<f64> = gaussian(n_steps, seed)
        .into_iter()
        .map(|z| -0.5 * sigma * sigma + sigma * z)
        .collect();
    prices_from_returns(asset_id, interval_seconds, 0, 100.0, &steps)
}
