use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::crosssection::BootstrapConfig;
use crate::dependence::{TraConfig, VolClusterConfig, DEFAULT_LEVERAGE_MAX_LAG, DEFAULT_MAX_LAG};
use crate::distribution::{DEFAULT_JB_HORIZONS_DAYS, DEFAULT_MIN_TAIL_POINTS, DEFAULT_TAIL_THRESHOLD_SIGMA};
use crate::error::{Error, Result};
use crate::ingestion::{parse_timestamp, SourceKind, SourceSpec};
use crate::timeseries::{SessionCalendar, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalendarChoice {
    /// trades around the clock
    #[default]
    Continuous,
    /// weekdays 09:30-16:00 New York
    UsEquity,
    /// Sunday 17:00 to Friday 17:00 New York
    Fx,
}

/// One asset of the run: identity plus where its candles come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetSource {
    pub asset_id: String,
    #[serde(default)]
    pub sector: String,
    #[serde(default)]
    pub calendar: CalendarChoice,
    #[serde(default)]
    pub holidays: Vec<NaiveDate>,
    #[serde(flatten)]
    pub source: SourceSpec,
}

impl AssetSource {
    pub fn session_calendar(&self) -> SessionCalendar {
        let h = self.holidays.iter().copied();
        match self.calendar {
            CalendarChoice::Continuous => SessionCalendar::continuous(),
            CalendarChoice::UsEquity => SessionCalendar::us_equity(h),
            CalendarChoice::Fx => SessionCalendar::fx(h),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    /// return horizon for the per-asset statistics
    pub horizon_seconds: i64,
    pub acf_max_lag: usize,
    pub leverage_max_lag: usize,
    pub tail_threshold_sigma: f64,
    pub min_tail_points: usize,
    /// power tail fits below this r², or beaten by the exponential fit, are flagged
    pub low_r2: f64,
    pub jb_horizons_days: Vec<f64>,
    /// |r| at or below this counts as a zero return
    pub zero_tolerance: f64,
    pub min_history_days: f64,
    pub vol_cluster: VolClusterConfig,
    pub tra: TraConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            horizon_seconds: 3600,
            acf_max_lag: DEFAULT_MAX_LAG,
            leverage_max_lag: DEFAULT_LEVERAGE_MAX_LAG,
            tail_threshold_sigma: DEFAULT_TAIL_THRESHOLD_SIGMA,
            min_tail_points: DEFAULT_MIN_TAIL_POINTS,
            low_r2: 0.97,
            jb_horizons_days: DEFAULT_JB_HORIZONS_DAYS.to_vec(),
            zero_tolerance: 0.0,
            min_history_days: 60.0,
            vol_cluster: VolClusterConfig::default(),
            tra: TraConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrossSectionConfig {
    pub enabled: bool,
    pub bootstrap_sample_size: usize,
    pub bootstrap_trials: usize,
    pub bootstrap_with_replacement: bool,
    /// rows of the trailing correlation window
    pub rolling_window: usize,
    pub n_clusters: usize,
    /// add the zero-return column to the clustering features
    pub include_zeros: bool,
    /// drop assets correlated above this with an earlier asset
    pub max_abs_corr: Option<f64>,
}

impl Default for CrossSectionConfig {
    fn default() -> Self {
        let b = BootstrapConfig::default();
        Self {
            enabled: true,
            bootstrap_sample_size: b.sample_size,
            bootstrap_trials: b.trials,
            bootstrap_with_replacement: b.with_replacement,
            rolling_window: 60,
            n_clusters: 8,
            include_zeros: false,
            max_abs_corr: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DateWindow {
    #[serde(default, deserialize_with = "de_opt_ts")]
    pub from: Option<Timestamp>,
    #[serde(default, deserialize_with = "de_opt_ts")]
    pub to: Option<Timestamp>,
}

fn de_opt_ts<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Timestamp>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Text(String),
    }
    match Option::<Raw>::deserialize(d)? {
        None => Ok(None),
        Some(Raw::Int(v)) => Ok(Some(v)),
        Some(Raw::Text(s)) => parse_timestamp(&s).map(Some).map_err(serde::de::Error::custom),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// candle cache; defaults to `<output_dir>/cache`
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub allow_network: bool,
    #[serde(default)]
    pub window: DateWindow,
    /// cut point for a pre/post pair of sub-reports
    #[serde(default, deserialize_with = "de_opt_ts")]
    pub split: Option<Timestamp>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub cross_section: CrossSectionConfig,
    #[serde(default)]
    pub sources: Vec<AssetSource>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("report")
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &Path| if p.is_relative() { base.join(p) } else { p.to_path_buf() };
        cfg.output_dir = resolve(&cfg.output_dir);
        cfg.cache_dir = cfg.cache_dir.as_deref().map(resolve);
        for s in &mut cfg.sources {
            if s.source.kind == SourceKind::File {
                s.source.location = resolve(Path::new(&s.source.location)).to_string_lossy().into_owned();
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sources.is_empty() {
            return Err(Error::Config("no sources configured".into()));
        }
        let mut seen = BTreeSet::new();
        for s in &self.sources {
            if s.asset_id.is_empty() {
                return Err(Error::Config("source without asset_id".into()));
            }
            if !seen.insert(s.asset_id.as_str()) {
                return Err(Error::Config(format!("duplicate asset_id {}", s.asset_id)));
            }
            s.source.validate()?;
        }
        if let (Some(a), Some(b)) = (self.window.from, self.window.to) {
            if b <= a {
                return Err(Error::Config("window.to must be after window.from".into()));
            }
        }
        if let Some(c) = self.split {
            if self.window.from.is_some_and(|f| c <= f) || self.window.to.is_some_and(|t| c >= t) {
                return Err(Error::Config("split must fall inside the window".into()));
            }
        }
        let a = &self.analysis;
        if a.horizon_seconds <= 0 || a.acf_max_lag == 0 || a.leverage_max_lag == 0 || a.jb_horizons_days.is_empty() {
            return Err(Error::Config("analysis horizons and lags must be positive".into()));
        }
        Ok(())
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir
            .clone()
            .unwrap_or_else(|| self.output_dir.join("cache"))
    }

    /// sha256 of the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}
