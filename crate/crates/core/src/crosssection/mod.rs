//! Cross-sectional structure: aligned return panels, correlation matrices,
//! eigen-spectra with bootstrap and random-matrix baselines, and the rolling
//! first-eigenvalue series.

pub mod cache;
mod cluster;

pub use cluster::{
    hierarchical_cluster, stylized_distance_matrix, Clustering, FactsDistanceMatrix, Merge,
};

use std::collections::BTreeSet;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::timeseries::{PriceSeries, ReturnSeries, Timestamp};

/// Returns of several assets on a common set of timestamps (rows).
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    asset_ids: Vec<String>,
    timestamps: Vec<Timestamp>,
    matrix: DMatrix<f64>,
}

impl ReturnPanel {
    pub fn new(asset_ids: Vec<String>, timestamps: Vec<Timestamp>, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.ncols() != asset_ids.len() || matrix.nrows() != timestamps.len() {
            return Err(Error::InvalidInput(format!(
                "panel shape {}x{} does not match {} timestamps x {} assets",
                matrix.nrows(),
                matrix.ncols(),
                timestamps.len(),
                asset_ids.len()
            )));
        }
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("panel timestamps not increasing".into()));
        }
        Ok(Self {
            asset_ids,
            timestamps,
            matrix,
        })
    }

    pub fn asset_ids(&self) -> &[String] {
        &self.asset_ids
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n_times(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_assets(&self) -> usize {
        self.matrix.ncols()
    }

    /// Fewer observations than assets: the correlation matrix is singular.
    pub fn is_underdetermined(&self) -> bool {
        self.n_times() <= self.n_assets()
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            asset_ids: cols.iter().map(|c| self.asset_ids[*c].clone()).collect(),
            timestamps: self.timestamps.clone(),
            matrix: self.matrix.select_columns(cols),
        }
    }

    pub fn select_rows(&self, start: usize, len: usize) -> Self {
        Self {
            asset_ids: self.asset_ids.clone(),
            timestamps: self.timestamps[start..start + len].to_vec(),
            matrix: self.matrix.rows(start, len).into_owned(),
        }
    }
}

/// Intersects timestamps across series; a row survives only if every asset
/// has a return there.
pub fn align_panel(series: &[ReturnSeries]) -> Result<ReturnPanel> {
    if series.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "a panel needs at least 2 series, got {}",
            series.len()
        )));
    }
    let horizon = series[0].horizon_seconds();
    if let Some(s) = series.iter().find(|s| s.horizon_seconds() != horizon) {
        return Err(Error::InvalidInput(format!(
            "{} has horizon {}s, panel horizon is {horizon}s",
            s.asset_id(),
            s.horizon_seconds()
        )));
    }
    let mut common: BTreeSet<Timestamp> = series[0].timestamps().collect();
    for s in &series[1..] {
        let ts: BTreeSet<Timestamp> = s.timestamps().collect();
        common = common.intersection(&ts).copied().collect();
    }
    if common.is_empty() {
        return Err(Error::InsufficientData(
            "series share no common timestamps".into(),
        ));
    }
    let timestamps: Vec<Timestamp> = common.into_iter().collect();
    let mut matrix = DMatrix::zeros(timestamps.len(), series.len());
    for (c, s) in series.iter().enumerate() {
        let mut row = 0;
        for &(t, v) in s.points() {
            if row < timestamps.len() && timestamps[row] == t {
                matrix[(row, c)] = v;
                row += 1;
            }
        }
    }
    let ids = series.iter().map(|s| s.asset_id().to_string()).collect();
    ReturnPanel::new(ids, timestamps, matrix)
}

/// Pearson correlation between panel columns, unit diagonal.
pub fn correlation_matrix(panel: &ReturnPanel) -> Result<DMatrix<f64>> {
    Ok(gram_correlation(&standardize(panel)?))
}

/// Columns centred and scaled to unit population variance.
fn standardize(panel: &ReturnPanel) -> Result<DMatrix<f64>> {
    let m = panel.matrix();
    let (t, n) = (m.nrows(), m.ncols());
    if t < 3 {
        return Err(Error::InsufficientData(format!(
            "correlation needs at least 3 rows, got {t}"
        )));
    }
    let mut z = m.clone();
    for c in 0..n {
        let col: Vec<f64> = m.column(c).iter().copied().collect();
        let (mu, sd) = stats::population_moments(&col);
        if !(sd > 0.0) || sd < 1e-14 * mu.abs() {
            return Err(Error::Degenerate(format!(
                "asset {} has zero variance",
                panel.asset_ids()[c]
            )));
        }
        for r in 0..t {
            z[(r, c)] = (m[(r, c)] - mu) / sd;
        }
    }
    Ok(z)
}

fn gram_correlation(z: &DMatrix<f64>) -> DMatrix<f64> {
    let n = z.ncols();
    let mut corr = z.transpose() * z / z.nrows() as f64;
    for i in 0..n {
        corr[(i, i)] = 1.0;
        for j in 0..i {
            let v = 0.5 * (corr[(i, j)] + corr[(j, i)]);
            corr[(i, j)] = v;
            corr[(j, i)] = v;
        }
    }
    corr
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    pub eigenvalues_sorted_desc: Vec<f64>,
    pub explained_fraction: Vec<f64>,
    /// every component of the leading eigenvector has the same sign
    pub first_eigvec_sign_uniform: bool,
    /// Marchenko-Pastur upper edge (1 + sqrt(n_assets / n_times))^2
    pub baseline_edge: f64,
    /// eigenvalues above the baseline edge
    pub n_above_baseline: usize,
}

pub fn marchenko_pastur_edge(n_assets: usize, n_times: usize) -> f64 {
    (1.0 + (n_assets as f64 / n_times as f64).sqrt()).powi(2)
}

pub fn eigen_spectrum(corr: &DMatrix<f64>, n_times: usize) -> Result<EigenReport> {
    let n = corr.nrows();
    if n == 0 || corr.ncols() != n {
        return Err(Error::InvalidInput("correlation matrix must be square and non-empty".into()));
    }
    if n_times == 0 {
        return Err(Error::InvalidInput("n_times must be positive".into()));
    }
    for i in 0..n {
        for j in 0..i {
            if (corr[(i, j)] - corr[(j, i)]).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let eig = SymmetricEigen::new(corr.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| eig.eigenvalues[*b].total_cmp(&eig.eigenvalues[*a]));
    let values: Vec<f64> = order.iter().map(|i| eig.eigenvalues[*i]).collect();
    let total: f64 = values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("eigenvalues sum to zero".into()));
    }
    let explained = values.iter().map(|v| v / total).collect();
    let first = eig.eigenvectors.column(order[0]);
    let tol = 1e-12;
    let sign_uniform = first.iter().all(|v| *v >= -tol) || first.iter().all(|v| *v <= tol);
    let edge = marchenko_pastur_edge(n, n_times);
    Ok(EigenReport {
        n_above_baseline: values.iter().filter(|v| **v > edge).count(),
        eigenvalues_sorted_desc: values,
        explained_fraction: explained,
        first_eigvec_sign_uniform: sign_uniform,
        baseline_edge: edge,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub sample_size: usize,
    pub trials: usize,
    pub seed: u64,
    pub with_replacement: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            sample_size: 145,
            trials: 500,
            seed: 0,
            with_replacement: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSpectrum {
    /// mean explained fraction per rank
    pub mean: Vec<f64>,
    /// standard error of the mean per rank
    pub stderr: Vec<f64>,
    /// mean - 3 * stderr
    pub conservative: Vec<f64>,
    pub trials: usize,
}

/// Column indices drawn for one bootstrap trial. Each trial has its own
/// stream so results do not depend on scheduling.
pub fn bootstrap_columns(config: &BootstrapConfig, trial: usize, width: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(trial as u64);
    if config.with_replacement {
        (0..config.sample_size).map(|_| rng.gen_range(0..width)).collect()
    } else {
        index::sample(&mut rng, width, config.sample_size.min(width)).into_vec()
    }
}

/// Mean normalized eigen-spectrum of randomly drawn column subsets.
pub fn bootstrap_spectrum(panel: &ReturnPanel, config: &BootstrapConfig) -> Result<BootstrapSpectrum> {
    if config.trials == 0 || config.sample_size == 0 {
        return Err(Error::InvalidInput("bootstrap needs trials and a sample size".into()));
    }
    let width = panel.n_assets();
    if !config.with_replacement && config.sample_size > width {
        return Err(Error::InvalidInput(format!(
            "cannot draw {} of {width} assets without replacement",
            config.sample_size
        )));
    }
    let z = standardize(panel)?;
    let spectra: Vec<Result<Vec<f64>>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let cols = bootstrap_columns(config, trial, width);
            let sub = gram_correlation(&z.select_columns(&cols));
            eigen_spectrum(&sub, panel.n_times()).map(|r| r.explained_fraction)
        })
        .collect();
    let spectra: Vec<Vec<f64>> = spectra.into_iter().collect::<Result<_>>()?;
    let k = spectra[0].len();
    let t = spectra.len() as f64;
    let mut mean = vec![0.0; k];
    let mut stderr = vec![0.0; k];
    for rank in 0..k {
        let col: Vec<f64> = spectra.iter().map(|s| s[rank]).collect();
        mean[rank] = stats::mean(&col);
        stderr[rank] = if col.len() > 1 {
            stats::sample_std(&col) / t.sqrt()
        } else {
            0.0
        };
    }
    let conservative = mean.iter().zip(&stderr).map(|(m, s)| m - 3.0 * s).collect();
    Ok(BootstrapSpectrum {
        mean,
        stderr,
        conservative,
        trials: config.trials,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RollingEigenPoint {
    pub timestamp: Timestamp,
    /// first-eigenvalue explained fraction over the trailing window;
    /// `None` when a column is constant inside the window
    pub first_fraction: Option<f64>,
    /// cumulative sum of the cross-asset mean return up to this row
    pub cum_mean_log_return: f64,
}

pub fn rolling_first_eigen(panel: &ReturnPanel, window: usize, step: usize) -> Result<Vec<RollingEigenPoint>> {
    if window < 3 || step == 0 {
        return Err(Error::InvalidInput("window must be >= 3 and step >= 1".into()));
    }
    if panel.n_times() < window {
        return Err(Error::InsufficientData(format!(
            "window of {window} rows exceeds the {}-row history",
            panel.n_times()
        )));
    }
    let m = panel.matrix();
    let mut cum = Vec::with_capacity(m.nrows());
    let mut acc = 0.0;
    for r in 0..m.nrows() {
        acc += m.row(r).mean();
        cum.push(acc);
    }
    let ends: Vec<usize> = (window - 1..m.nrows()).step_by(step).collect();
    Ok(ends
        .par_iter()
        .map(|&end| {
            let sub = panel.select_rows(end + 1 - window, window);
            let first = correlation_matrix(&sub)
                .and_then(|c| eigen_spectrum(&c, window))
                .ok()
                .map(|r| r.explained_fraction[0]);
            RollingEigenPoint {
                timestamp: panel.timestamps()[end],
                first_fraction: first,
                cum_mean_log_return: cum[end],
            }
        })
        .collect())
}

/// Drops every asset whose returns correlate above `max_abs_corr` with an
/// asset kept earlier (duplicate listings).
pub fn drop_near_duplicates(panel: &ReturnPanel, max_abs_corr: f64) -> Result<ReturnPanel> {
    let corr = correlation_matrix(panel)?;
    let mut kept: Vec<usize> = Vec::new();
    for c in 0..panel.n_assets() {
        if kept.iter().all(|k| corr[(*k, c)].abs() <= max_abs_corr) {
            kept.push(c);
        }
    }
    Ok(panel.select_columns(&kept))
}

/// Assets whose last observed price is at least `min_price`.
pub fn filter_by_last_price(series: &[PriceSeries], min_price: f64) -> Vec<&PriceSeries> {
    series
        .iter()
        .filter(|s| s.points().last().is_some_and(|p| p.1 >= min_price))
        .collect()
}
