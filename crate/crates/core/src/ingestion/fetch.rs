use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Deserializer, Serialize};

use super::{candles_to_string, dedup_candles, parse_candles, parse_candles_from_reader, CandleRecord, CandleSchema};
use crate::crosssection::cache::write_atomic;
use crate::error::{Error, Result};
use crate::timeseries::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    File,
    Http,
}

/// Where one asset's candles come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub kind: SourceKind,
    /// file path, or URL template with `{symbol}`, `{interval}`,
    /// `{interval_seconds}`, `{start}`, `{end}`, `{start_ms}`, `{end_ms}`
    /// and `{limit}` placeholders (`end` exclusive, `end_ms` inclusive)
    pub location: String,
    #[serde(default)]
    pub venue: String,
    #[serde(default)]
    pub symbol: String,
    pub interval_seconds: i64,
    /// venue spelling of the interval, e.g. `1h`
    #[serde(default)]
    pub interval_label: Option<String>,
    #[serde(default, deserialize_with = "de_opt_timestamp")]
    pub start: Option<Timestamp>,
    #[serde(default, deserialize_with = "de_opt_timestamp")]
    pub end: Option<Timestamp>,
    /// requests per second
    #[serde(default)]
    pub rate_limit: f64,
    #[serde(default = "default_page_size")]
    pub page_size: usize,
    /// column map; defaults to the venue's map, then the canonical layout
    #[serde(default)]
    pub schema: Option<CandleSchema>,
}

fn default_page_size() -> usize {
    1000
}

/// Epoch seconds, `YYYY-MM-DD` (UTC midnight) or RFC 3339.
pub fn parse_timestamp(s: &str) -> Result<Timestamp> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Ok(v);
    }
    if let Ok(d) = chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp());
    }
    chrono::DateTime::parse_from_rfc3339(s)
        .map(|d| d.timestamp())
        .map_err(|_| Error::Config(format!("`{s}` is not epoch seconds, a date or RFC 3339")))
}

fn de_opt_timestamp<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Timestamp>, D::Error> {
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

impl SourceSpec {
    pub fn validate(&self) -> Result<()> {
        let name = if self.symbol.is_empty() { &self.location } else { &self.symbol };
        if self.interval_seconds <= 0 {
            return Err(Error::Config(format!("{}: interval must be positive", name)));
        }
        if let (Some(a), Some(b)) = (self.start, self.end) {
            if b <= a {
                return Err(Error::Config(format!("{}: empty date range", name)));
            }
        }
        if self.kind == SourceKind::Http {
            if !(self.rate_limit > 0.0) {
                return Err(Error::Config(format!(
                    "{}: http sources need rate_limit > 0",
                    name
                )));
            }
            if self.page_size == 0 || self.start.is_none() || self.end.is_none() {
                return Err(Error::Config(format!(
                    "{}: http sources need page_size, start and end",
                    name
                )));
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> CandleSchema {
        self.schema
            .clone()
            .or_else(|| CandleSchema::for_venue(&self.venue))
            .unwrap_or_else(CandleSchema::canonical)
    }

    fn interval_text(&self) -> String {
        self.interval_label
            .clone()
            .unwrap_or_else(|| self.interval_seconds.to_string())
    }

    fn url(&self, page: (Timestamp, Timestamp)) -> String {
        let limit = ((page.1 - page.0) / self.interval_seconds).to_string();
        self.location
            .replace("{symbol}", &self.symbol)
            .replace("{interval_seconds}", &self.interval_seconds.to_string())
            .replace("{interval}", &self.interval_text())
            .replace("{start_ms}", &(page.0 * 1000).to_string())
            .replace("{end_ms}", &(page.1 * 1000 - 1).to_string())
            .replace("{start}", &page.0.to_string())
            .replace("{end}", &page.1.to_string())
            .replace("{limit}", &limit)
    }

    /// Cache file for this exact venue, symbol, interval and range.
    pub fn cache_path(&self, root: &Path) -> PathBuf {
        let clean = |s: &str| -> String {
            let c: String = s
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
                .collect();
            if c.is_empty() {
                "_".into()
            } else {
                c
            }
        };
        root.join(clean(&self.venue))
            .join(clean(&self.symbol))
            .join(clean(&self.interval_text()))
            .join(format!(
                "{}-{}.csv",
                self.start.unwrap_or(0),
                self.end.unwrap_or(0)
            ))
    }
}

/// Page ranges covering `[start, end)` with `page_size` candles each.
pub fn page_plan(spec: &SourceSpec) -> Result<Vec<(Timestamp, Timestamp)>> {
    spec.validate()?;
    let (start, end) = match (spec.start, spec.end) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Config("page plan needs start and end".into())),
    };
    let span = spec.page_size as i64 * spec.interval_seconds;
    let mut pages = Vec::new();
    let mut a = start;
    while a < end {
        let b = (a + span).min(end);
        pages.push((a, b));
        a = b;
    }
    Ok(pages)
}

struct Bucket {
    tokens: f64,
    last: Instant,
}

/// Token bucket per host. Waiting callers reserve their token up front so
/// concurrent fetches queue fairly.
#[derive(Default)]
pub struct RateLimiter {
    buckets: Mutex<HashMap<String, Bucket>>,
}

impl RateLimiter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn acquire(&self, host: &str, rate: f64) {
        let burst = rate.max(1.0);
        let wait = {
            let mut map = self.buckets.lock().unwrap();
            let now = Instant::now();
            let b = map.entry(host.to_string()).or_insert(Bucket {
                tokens: burst,
                last: now,
            });
            b.tokens = (b.tokens + now.duration_since(b.last).as_secs_f64() * rate).min(burst);
            b.last = now;
            b.tokens -= 1.0;
            if b.tokens >= 0.0 {
                0.0
            } else {
                -b.tokens / rate
            }
        };
        if wait > 0.0 {
            thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub cache_dir: PathBuf,
    pub allow_network: bool,
    pub max_retries: u32,
    pub base_backoff: Duration,
    pub timeout: Duration,
}

impl FetchOptions {
    pub fn new(cache_dir: impl Into<PathBuf>, allow_network: bool) -> Self {
        Self {
            cache_dir: cache_dir.into(),
            allow_network,
            max_retries: 5,
            base_backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchResult {
    pub records: Vec<CandleRecord>,
    /// fewer candles than the range holds
    pub partial: bool,
    pub missing: usize,
    pub requests: usize,
    pub from_cache: bool,
    pub rejected: usize,
    pub duplicates: usize,
}

pub struct Fetcher {
    client: reqwest::blocking::Client,
    limiter: Arc<RateLimiter>,
    options: FetchOptions,
    requests: AtomicUsize,
}

enum Attempt {
    Done(String),
    Transient(String),
    Fatal(Error),
}

impl Fetcher {
    pub fn new(options: FetchOptions) -> Result<Self> {
        Self::with_limiter(options, Arc::new(RateLimiter::new()))
    }

    pub fn with_limiter(options: FetchOptions, limiter: Arc<RateLimiter>) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(options.timeout)
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(Self {
            client,
            limiter,
            options,
            requests: AtomicUsize::new(0),
        })
    }

    /// Total HTTP requests issued so far, retries included.
    pub fn requests_made(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    /// Reads a file source or fetches an http source, restricted to the
    /// spec's date range.
    pub fn load(&self, spec: &SourceSpec) -> Result<FetchResult> {
        spec.validate()?;
        match spec.kind {
            SourceKind::File => {
                let report = parse_candles(Path::new(&spec.location), &spec.schema())?;
                let records: Vec<CandleRecord> = report
                    .records
                    .into_iter()
                    .filter(|c| spec.start.is_none_or(|s| c.timestamp >= s) && spec.end.is_none_or(|e| c.timestamp < e))
                    .collect();
                Ok(FetchResult {
                    records,
                    partial: false,
                    missing: 0,
                    requests: 0,
                    from_cache: false,
                    rejected: report.rejected.len(),
                    duplicates: report.duplicates,
                })
            }
            SourceKind::Http => self.fetch(spec),
        }
    }

    pub fn fetch(&self, spec: &SourceSpec) -> Result<FetchResult> {
        let pages = page_plan(spec)?;
        let (start, end) = (spec.start.unwrap(), spec.end.unwrap());
        let expected = ((end - start + spec.interval_seconds - 1) / spec.interval_seconds) as usize;
        let path = spec.cache_path(&self.options.cache_dir);
        let marker = path.with_extension("partial");
        if let Ok(bytes) = fs::read(&path) {
            let report = parse_candles_from_reader(bytes.as_slice(), &CandleSchema::canonical())?;
            let missing = expected.saturating_sub(report.records.len());
            return Ok(FetchResult {
                partial: marker.exists() || missing > 0,
                missing,
                records: report.records,
                requests: 0,
                from_cache: true,
                rejected: 0,
                duplicates: 0,
            });
        }
        if !self.options.allow_network {
            return Err(Error::NetworkDisabled(format!(
                "{} {} [{start}, {end})",
                spec.venue, spec.symbol
            )));
        }
        let schema = spec.schema();
        let mut all = Vec::new();
        let mut rejected = 0;
        let before = self.requests_made();
        for page in pages {
            let body = self.get_with_retries(&spec.url(page), spec.rate_limit)?;
            let rows: Vec<Vec<serde_json::Value>> = serde_json::from_str(&body).map_err(|e| Error::Parse {
                line: e.line() as u64,
                message: format!("candle page is not an array of arrays: {e}"),
            })?;
            for (i, row) in rows.iter().enumerate() {
                let cells: Vec<String> = row
                    .iter()
                    .map(|v| match v {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                let c = schema.record_from_cells(&cells).map_err(|message| Error::Parse {
                    line: i as u64 + 1,
                    message,
                })?;
                if c.timestamp < start || c.timestamp >= end {
                    continue;
                }
                match c.validate() {
                    Ok(()) => all.push(c),
                    Err(_) => rejected += 1,
                }
            }
        }
        let (records, duplicates) = dedup_candles(all);
        let missing = expected.saturating_sub(records.len());
        write_atomic(&path, candles_to_string(&records).as_bytes())?;
        if missing > 0 {
            write_atomic(&marker, format!("missing={missing}\n").as_bytes())?;
        } else if marker.exists() {
            fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
        }
        Ok(FetchResult {
            records,
            partial: missing > 0,
            missing,
            requests: self.requests_made() - before,
            from_cache: false,
            rejected,
            duplicates,
        })
    }

    fn get_with_retries(&self, url: &str, rate: f64) -> Result<String> {
        let host = reqwest::Url::parse(url)
            .map_err(|e| Error::Config(format!("bad url `{url}`: {e}")))?
            .host_str()
            .unwrap_or("")
            .to_string();
        let mut last = String::new();
        for attempt in 0..=self.options.max_retries {
            if attempt > 0 {
                let factor = 1u32 << (attempt - 1).min(10);
                thread::sleep(self.options.base_backoff * factor);
            }
            self.limiter.acquire(&host, rate);
            self.requests.fetch_add(1, Ordering::SeqCst);
            match self.attempt(url) {
                Attempt::Done(body) => return Ok(body),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Transient(status) => {
                    log::warn!("transient failure on {url}: {status}");
                    last = status;
                }
            }
        }
        Err(Error::RetriesExhausted {
            attempts: self.options.max_retries + 1,
            last_status: last,
        })
    }

    fn attempt(&self, url: &str) -> Attempt {
        match self.client.get(url).send() {
            Err(e) => Attempt::Transient(e.to_string()),
            Ok(resp) => {
                let status = resp.status();
                if status.is_success() {
                    match resp.text() {
                        Ok(body) => Attempt::Done(body),
                        Err(e) => Attempt::Transient(e.to_string()),
                    }
                } else if status.as_u16() == 429 || status.is_server_error() {
                    Attempt::Transient(status.to_string())
                } else {
                    Attempt::Fatal(Error::Http {
                        status: status.as_u16(),
                        url: url.to_string(),
                    })
                }
            }
        }
    }
}

/// One-shot fetch with a private rate limiter.
pub fn fetch_candles(spec: &SourceSpec, options: FetchOptions) -> Result<FetchResult> {
    Fetcher::new(options)?.fetch(spec)
}
