//! Per-asset stylized-facts rows, cross-sectional artifacts and the report
//! bundle written to disk.

mod config;
mod manifest;
mod plot;

pub use config::{AnalysisConfig, AssetSource, CalendarChoice, CrossSectionConfig, DateWindow, RunConfig};
pub use manifest::{verify_manifest, Manifest};
pub use plot::{emit_plot_data, FIGURES};

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::crosssection::cache::MatrixCache;
use crate::crosssection::{
    align_panel, bootstrap_spectrum, correlation_matrix, drop_near_duplicates, eigen_spectrum,
    hierarchical_cluster, rolling_first_eigen, stylized_distance_matrix, BootstrapConfig,
    BootstrapSpectrum, Clustering, EigenReport, FactsDistanceMatrix, RollingEigenPoint,
};
use crate::dependence::{
    acf_summary, leverage, leverage_summary, session_acf, tra, vol_cluster_fit, AcfResult, LeverageCurve,
    TraResult, VolClusterFit,
};
use crate::distribution::{fit_tail, jb_scan, mountain_cdf, JBScan, MountainCdf, Side, TailFit, TailModel};
use crate::error::{Error, Result};
use crate::facts::{FactColumn, Stat, StylizedFactsRow};
use crate::ingestion::{to_price_series, FetchOptions, Fetcher, PriceField};
use crate::timeseries::{
    log_returns, normalize, resample_last, session_filter, zero_fraction, PriceSeries, SessionCalendar, Timestamp,
};

const DAY: i64 = 86_400;

/// Short machine-readable reason for an absent statistic.
pub fn reason_code(e: &Error) -> &'static str {
    match e {
        Error::InsufficientData(_) => "insufficient_data",
        Error::Degenerate(_) => "degenerate",
        Error::InvalidInput(_) => "invalid_input",
        Error::TooFewTailPoints { .. } => "too_few_tail_points",
        Error::MissingLags(_) => "missing_lags",
        Error::Parse { .. } => "parse_error",
        Error::RetriesExhausted { .. } | Error::Http { .. } => "fetch_failed",
        Error::NetworkDisabled(_) => "network_disabled",
        Error::Config(_) => "config",
        Error::Io { .. } => "io",
        Error::UnknownFigure { .. } => "unknown_figure",
    }
}

fn stat<T>(r: &Result<T>, f: impl Fn(&T) -> f64) -> Stat {
    match r {
        Ok(v) => Stat::Value(f(v)),
        Err(e) => Stat::absent(reason_code(e)),
    }
}

/// Everything computed for one asset; the row plus the curves behind it.
#[derive(Debug, Clone)]
pub struct AssetAnalysis {
    pub row: StylizedFactsRow,
    pub prices: PriceSeries,
    pub acf: Option<AcfResult>,
    pub vol_cluster: Option<VolClusterFit>,
    pub leverage: Option<LeverageCurve>,
    pub tra: Option<TraResult>,
    pub mountain: Option<MountainCdf>,
    pub tails: Vec<TailFit>,
    pub jb: Option<JBScan>,
}

pub fn compute_asset(
    asset_id: &str,
    sector: &str,
    prices: &PriceSeries,
    calendar: &SessionCalendar,
    config: &AnalysisConfig,
) -> Result<AssetAnalysis> {
    let (first, last) = match (prices.points().first(), prices.points().last()) {
        (Some(a), Some(b)) if prices.len() >= 2 => (a.0, b.0),
        _ => return Err(Error::InsufficientData(format!("{asset_id}: fewer than 2 prices"))),
    };
    let span_days = (last - first) as f64 / DAY as f64;
    if span_days < config.min_history_days {
        return Err(Error::InsufficientData(format!(
            "{asset_id}: {span_days:.1} days of history, need {}",
            config.min_history_days
        )));
    }
    let base = log_returns(prices, prices.interval_seconds())?;
    let returns = session_filter(&log_returns(prices, config.horizon_seconds)?, calendar);

    let mut row = StylizedFactsRow::empty(asset_id, sector, first, last, "not_computed");
    let zeros = zero_fraction(&session_filter(&base, calendar), config.zero_tolerance);
    row.set(FactColumn::ZerosPct, stat(&zeros, |z| 100.0 * z));

    let acf = session_acf(&returns, calendar, config.acf_max_lag);
    let summary = acf.as_ref().map_err(clone_err).and_then(acf_summary);
    row.set(FactColumn::AvgAcf124, stat(&summary, |s| s.avg_1_24));
    row.set(FactColumn::AvgAcfElse, stat(&summary, |s| s.avg_else));

    let vc = vol_cluster_fit(&returns, calendar, &config.vol_cluster);
    row.set(FactColumn::VolclustSlope, stat(&vc, |f| f.slope));
    row.set(FactColumn::VolclustIntercept, stat(&vc, |f| f.intercept));

    let lev = leverage(&returns, config.leverage_max_lag);
    let lev_sum = lev.as_ref().map_err(clone_err).and_then(leverage_summary);
    row.set(FactColumn::AvgLevPos, stat(&lev_sum, |s| s.avg_pos));
    row.set(FactColumn::AvgLevNeg, stat(&lev_sum, |s| s.avg_neg));

    let tr = tra(&returns, calendar, &config.tra);
    row.set(FactColumn::TraIni, stat(&tr, |t| t.initial()));
    row.set(FactColumn::TraFin, stat(&tr, |t| t.last()));

    let norm = normalize(&returns);
    let mountain = norm.as_ref().ok().map(mountain_cdf);
    let mut tails = Vec::new();
    for (side, column) in [(Side::Right, FactColumn::CdfTailRight), (Side::Left, FactColumn::CdfTailLeft)] {
        let fit_model = |model| {
            norm.as_ref().map_err(clone_err).and_then(|n| {
                fit_tail(&n.values(), side, model, config.tail_threshold_sigma, config.min_tail_points)
            })
        };
        let fit = fit_model(TailModel::Power);
        let exp_fit = fit_model(TailModel::Exponential).ok();
        match fit {
            Ok(f) if f.exponent > 0.0 => {
                let beaten = exp_fit.is_some_and(|e| e.r_squared > f.r_squared);
                if f.r_squared < config.low_r2 || beaten {
                    row.flags.push(format!("{}:low_r2", column.name()));
                }
                row.set(column, Stat::Value(f.exponent));
                tails.push(f);
                tails.extend(exp_fit);
            }
            Ok(_) => row.set(column, Stat::absent("nonpositive_exponent")),
            Err(e) => row.set(column, Stat::absent(reason_code(&e))),
        }
    }

    let jb = jb_scan(prices, &config.jb_horizons_days);
    row.set(FactColumn::JbSlope, stat(&jb, |s| s.slope));

    Ok(AssetAnalysis {
        row,
        prices: prices.clone(),
        acf: acf.ok(),
        vol_cluster: vc.ok(),
        leverage: lev.ok(),
        tra: tr.ok(),
        mountain,
        tails,
        jb: jb.ok(),
    })
}

/// Rebuilds an owned error for chaining through `and_then`.
fn clone_err(e: &Error) -> Error {
    match e {
        Error::InsufficientData(m) => Error::InsufficientData(m.clone()),
        Error::Degenerate(m) => Error::Degenerate(m.clone()),
        Error::InvalidInput(m) => Error::InvalidInput(m.clone()),
        Error::TooFewTailPoints { found, needed } => Error::TooFewTailPoints {
            found: *found,
            needed: *needed,
        },
        Error::MissingLags(l) => Error::MissingLags(l.clone()),
        other => Error::InvalidInput(other.to_string()),
    }
}

/// The stylized-facts row of one price history.
pub fn compute_row(
    asset_id: &str,
    sector: &str,
    prices: &PriceSeries,
    calendar: &SessionCalendar,
    config: &AnalysisConfig,
) -> Result<StylizedFactsRow> {
    compute_asset(asset_id, sector, prices, calendar, config).map(|a| a.row)
}

#[derive(Debug, Clone)]
pub struct CrossSection {
    /// assets in panel column order
    pub assets: Vec<String>,
    pub n_times: usize,
    pub correlation: DMatrix<f64>,
    pub eigen: EigenReport,
    pub bootstrap: Option<BootstrapSpectrum>,
    pub rolling: Option<Vec<RollingEigenPoint>>,
    pub distance: Option<FactsDistanceMatrix>,
    pub clustering: Option<Clustering>,
}

#[derive(Debug, Clone)]
pub struct AssetOutcome {
    pub source: AssetSource,
    pub analysis: std::result::Result<AssetAnalysis, String>,
    pub row: StylizedFactsRow,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub config_hash: String,
    pub seed: u64,
    pub window: DateWindow,
    /// sorted by asset id
    pub assets: Vec<AssetOutcome>,
    pub cross: Option<CrossSection>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn rows(&self) -> Vec<StylizedFactsRow> {
        self.assets.iter().map(|a| a.row.clone()).collect()
    }

    pub fn failed(&self) -> Vec<&AssetOutcome> {
        self.assets.iter().filter(|a| a.analysis.is_err()).collect()
    }

    pub fn analyses(&self) -> impl Iterator<Item = &AssetAnalysis> {
        self.assets.iter().filter_map(|a| a.analysis.as_ref().ok())
    }
}

/// Loaded price history per source, in asset-id order.
pub type LoadedPrices = Vec<(AssetSource, std::result::Result<PriceSeries, String>)>;

pub fn load_prices(config: &RunConfig) -> Result<LoadedPrices> {
    config.validate()?;
    let fetcher = Fetcher::new(FetchOptions::new(config.cache_dir(), config.allow_network))?;
    let mut sources = config.sources.clone();
    sources.sort_by(|a, b| a.asset_id.cmp(&b.asset_id));
    Ok(sources
        .into_par_iter()
        .map(|s| {
            let loaded = fetcher.load(&s.source).and_then(|r| {
                if r.partial {
                    log::warn!("{}: partial history, {} candles missing", s.asset_id, r.missing);
                }
                to_price_series(&s.asset_id, &r.records, PriceField::Close, Some(s.source.interval_seconds))
                    .map(|c| c.series)
            });
            let loaded = loaded.map_err(|e| format!("{}: {e}", reason_code(&e)));
            (s, loaded)
        })
        .collect())
}

/// Computes every row and the cross-sectional artifacts for one window.
pub fn build_report(config: &RunConfig, loaded: &LoadedPrices, window: &DateWindow) -> Report {
    let assets: Vec<AssetOutcome> = loaded
        .par_iter()
        .map(|(src, prices)| {
            let result = prices.clone().and_then(|p| {
                let w = p.window(window.from, window.to);
                compute_asset(&src.asset_id, &src.sector, &w, &src.session_calendar(), &config.analysis)
                    .map_err(|e| format!("{}: {e}", reason_code(&e)))
            });
            let row = match &result {
                Ok(a) => a.row.clone(),
                Err(msg) => {
                    let code = msg.split(':').next().unwrap_or("failed");
                    let mut r = StylizedFactsRow::empty(&src.asset_id, &src.sector, 0, 0, code);
                    r.flags.push(format!("failed:{code}"));
                    r
                }
            };
            AssetOutcome {
                source: src.clone(),
                analysis: result,
                row,
            }
        })
        .collect();
    let mut notes: Vec<String> = assets
        .iter()
        .filter_map(|a| a.analysis.as_ref().err().map(|m| format!("asset {}: {m}", a.source.asset_id)))
        .collect();
    let cross = if config.cross_section.enabled {
        match cross_section(config, &assets) {
            Ok(c) => Some(c),
            Err(e) => {
                notes.push(format!("cross-section skipped: {e}"));
                None
            }
        }
    } else {
        None
    };
    Report {
        config_hash: config.hash(),
        seed: config.seed,
        window: window.clone(),
        assets,
        cross,
        notes,
    }
}

fn cross_section(config: &RunConfig, assets: &[AssetOutcome]) -> Result<CrossSection> {
    let cs = &config.cross_section;
    let mut daily = Vec::new();
    for a in assets {
        if let Ok(an) = &a.analysis {
            let d = resample_last(&an.prices, DAY).and_then(|p| log_returns(&p, DAY));
            match d {
                Ok(r) => daily.push(r),
                Err(e) => log::warn!("{}: no daily returns: {e}", a.source.asset_id),
            }
        }
    }
    let mut panel = align_panel(&daily)?;
    if let Some(c) = cs.max_abs_corr {
        panel = drop_near_duplicates(&panel, c)?;
    }
    let cache = MatrixCache::new(config.cache_dir().join("matrices"));
    let correlation = cache.get_or_compute("corr", &panel, correlation_matrix)?;
    let eigen = eigen_spectrum(&correlation, panel.n_times())?;
    let sample_size = if cs.bootstrap_with_replacement {
        cs.bootstrap_sample_size
    } else {
        cs.bootstrap_sample_size.min(panel.n_assets())
    };
    let bootstrap = if cs.bootstrap_trials > 0 {
        let b = BootstrapConfig {
            sample_size,
            trials: cs.bootstrap_trials,
            seed: config.seed,
            with_replacement: cs.bootstrap_with_replacement,
        };
        Some(bootstrap_spectrum(&panel, &b)?)
    } else {
        None
    };
    let rolling = if panel.n_times() >= cs.rolling_window {
        Some(rolling_first_eigen(&panel, cs.rolling_window, 1)?)
    } else {
        None
    };
    let rows: Vec<StylizedFactsRow> = assets
        .iter()
        .filter(|a| a.analysis.is_ok())
        .map(|a| a.row.clone())
        .collect();
    let (distance, clustering) = if rows.len() >= 3 {
        let d = stylized_distance_matrix(&rows, &FactColumn::clustering_default(cs.include_zeros))?;
        let c = hierarchical_cluster(&d, cs.n_clusters.clamp(1, d.len()))?;
        (Some(d), Some(c))
    } else {
        (None, None)
    };
    Ok(CrossSection {
        assets: panel.asset_ids().to_vec(),
        n_times: panel.n_times(),
        correlation,
        eigen,
        bootstrap,
        rolling,
        distance,
        clustering,
    })
}

/// Writes rows, notes, every available figure and the manifest into `dir`,
/// then checks the manifest against the files.
pub fn write_report(report: &Report, dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<PathBuf> = Vec::new();

    let rows_path = dir.join("rows.csv");
    let mut w = csv::Writer::from_path(&rows_path).map_err(|e| csv_err(&rows_path, e))?;
    w.write_record(StylizedFactsRow::header()).map_err(|e| csv_err(&rows_path, e))?;
    for a in &report.assets {
        w.write_record(a.row.to_record()).map_err(|e| csv_err(&rows_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&rows_path, e))?;
    files.push(rows_path);

    let mut notes = report.notes.clone();
    for id in FIGURES {
        match emit_plot_data(report, id, &dir.join("plots")) {
            Ok(mut written) => files.append(&mut written),
            Err(e) => notes.push(format!("figure {id} not written: {e}")),
        }
    }
    let notes_path = dir.join("notes.txt");
    let mut text = notes.join("\n");
    text.push('\n');
    std::fs::write(&notes_path, text).map_err(|e| Error::io(&notes_path, e))?;
    files.push(notes_path);

    let manifest = Manifest::build(report, dir, &files)?;
    manifest.write(dir)?;
    verify_manifest(dir)?;
    Ok(manifest)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

#[derive(Debug, Clone)]
pub struct ReportOutcome {
    pub dir: PathBuf,
    pub report: Report,
    pub manifest: Manifest,
    /// pre/post sub-reports when a split is configured
    pub sub_reports: Vec<ReportOutcome>,
}

impl ReportOutcome {
    /// Any asset failed here or in a sub-report.
    pub fn is_partial(&self) -> bool {
        !self.report.failed().is_empty() || self.sub_reports.iter().any(|s| s.is_partial())
    }
}

/// Full pipeline: load sources, compute rows and cross-sectional artifacts,
/// write the bundle, and repeat for the pre/post halves of a split.
pub fn run_report(config: &RunConfig) -> Result<ReportOutcome> {
    let loaded = load_prices(config)?;
    let dir = config.output_dir.clone();
    let report = build_report(config, &loaded, &config.window);
    let manifest = write_report(&report, &dir)?;
    let mut sub_reports = Vec::new();
    if let Some(cut) = config.split {
        let halves = [
            ("pre", DateWindow { from: config.window.from, to: Some(cut) }),
            ("post", DateWindow { from: Some(cut), to: config.window.to }),
        ];
        for (name, window) in halves {
            let sub = build_report(config, &loaded, &window);
            let sub_dir = dir.join(name);
            let m = write_report(&sub, &sub_dir)?;
            sub_reports.push(ReportOutcome {
                dir: sub_dir,
                report: sub,
                manifest: m,
                sub_reports: Vec::new(),
            });
        }
    }
    Ok(ReportOutcome {
        dir,
        report,
        manifest,
        sub_reports,
    })
}

/// Window bounds as text for manifests.
pub(crate) fn fmt_bound(t: Option<Timestamp>) -> String {
    t.map_or_else(|| "open".to_string(), |v| v.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn gbm_row_has_expected_presence_and_flags() {
        let p = synth::gbm("GBM", 24 * 730, 3600, 0.01, 3).unwrap();
        let a = compute_asset("GBM", "synthetic", &p, &SessionCalendar::continuous(), &AnalysisConfig::default()).unwrap();
        let row = a.row;
        for c in FactColumn::ALL {
            let v = c.get(&row);
            if matches!(c, FactColumn::VolclustSlope | FactColumn::VolclustIntercept) {
                // iid returns carry no significant |R| autocorrelation to fit
                assert_eq!(v, &Stat::absent("insufficient_data"), "{}", c.name());
            } else {
                assert!(v.value().is_some(), "{} absent: {v}", c.name());
            }
        }
        assert!(row.flags.contains(&"cdf_tail_right:low_r2".to_string()));
        assert!(row.flags.contains(&"cdf_tail_left:low_r2".to_string()));
        let z = row.zeros_pct.value().unwrap();
        assert!((0.0..=100.0).contains(&z));
        let again = compute_row("GBM", "synthetic", &p, &SessionCalendar::continuous(), &AnalysisConfig::default()).unwrap();
        assert_eq!(row, again);
    }

    #[test]
    fn short_history_is_an_error() {
        let p = synth::gbm("G", 24 * 10, 3600, 0.01, 3).unwrap();
        let e = compute_row("G", "", &p, &SessionCalendar::continuous(), &AnalysisConfig::default()).unwrap_err();
        assert_eq!(reason_code(&e), "insufficient_data");
    }
}
