//! Candle files, paginated HTTP candle fetching with a local cache, and
//! conversion to price series.

mod fetch;

pub use fetch::{
    fetch_candles, page_plan, parse_timestamp, FetchOptions, FetchResult, Fetcher, RateLimiter, SourceKind, SourceSpec,
};

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{PriceSeries, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandleRecord {
    /// open time, epoch seconds UTC
    pub timestamp: Timestamp,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl CandleRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let prices = [self.open, self.high, self.low, self.close];
        if prices.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err("prices must be positive and finite".into());
        }
        if !(self.volume.is_finite() && self.volume >= 0.0) {
            return Err("volume must be nonnegative".into());
        }
        if self.low > self.open.min(self.close) || self.high < self.open.max(self.close) || self.low > self.high {
            return Err(format!(
                "OHLC out of order: o={} h={} l={} c={}",
                self.open, self.high, self.low, self.close
            ));
        }
        Ok(())
    }

    pub fn field(&self, field: PriceField) -> f64 {
        match field {
            PriceField::Open => self.open,
            PriceField::High => self.high,
            PriceField::Low => self.low,
            PriceField::Close => self.close,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriceField {
    Open,
    High,
    Low,
    #[default]
    Close,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimestampUnit {
    #[default]
    Seconds,
    Milliseconds,
}

impl TimestampUnit {
    fn to_seconds(self, raw: i64) -> Timestamp {
        match self {
            TimestampUnit::Seconds => raw,
            TimestampUnit::Milliseconds => raw.div_euclid(1000),
        }
    }
}

/// Positions of each candle field within a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub timestamp: usize,
    pub open: usize,
    pub high: usize,
    pub low: usize,
    pub close: usize,
    pub volume: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandleSchema {
    pub columns: ColumnMap,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default)]
    pub has_header: bool,
    #[serde(default)]
    pub timestamp_unit: TimestampUnit,
}

fn default_delimiter() -> char {
    ','
}

impl CandleSchema {
    /// `timestamp,open,high,low,close,volume` with a header, epoch seconds.
    pub fn canonical() -> Self {
        Self {
            columns: ColumnMap {
                timestamp: 0,
                open: 1,
                high: 2,
                low: 3,
                close: 4,
                volume: 5,
            },
            delimiter: ',',
            has_header: true,
            timestamp_unit: TimestampUnit::Seconds,
        }
    }

    /// Binance kline rows: open time (ms), open, high, low, close, volume, ...
    pub fn binance() -> Self {
        Self {
            has_header: false,
            timestamp_unit: TimestampUnit::Milliseconds,
            ..Self::canonical()
        }
    }

    /// Coinbase candle rows: time (s), low, high, open, close, volume.
    pub fn coinbase() -> Self {
        Self {
            columns: ColumnMap {
                timestamp: 0,
                low: 1,
                high: 2,
                open: 3,
                close: 4,
                volume: 5,
            },
            has_header: false,
            ..Self::canonical()
        }
    }

    pub fn for_venue(venue: &str) -> Option<Self> {
        match venue.to_ascii_lowercase().as_str() {
            "binance" => Some(Self::binance()),
            "coinbase" => Some(Self::coinbase()),
            "canonical" | "file" => Some(Self::canonical()),
            _ => None,
        }
    }

    fn width(&self) -> usize {
        let c = &self.columns;
        [c.timestamp, c.open, c.high, c.low, c.close, c.volume]
            .into_iter()
            .max()
            .unwrap()
            + 1
    }

    /// Builds a record from the cells of one row.
    pub(crate) fn record_from_cells<S: AsRef<str>>(&self, cells: &[S]) -> std::result::Result<CandleRecord, String> {
        if cells.len() < self.width() {
            return Err(format!("expected at least {} fields, found {}", self.width(), cells.len()));
        }
        let num = |i: usize, name: &str| -> std::result::Result<f64, String> {
            let s = cells[i].as_ref().trim();
            s.parse::<f64>().map_err(|_| format!("{name} `{s}` is not a number"))
        };
        let ts_raw = cells[self.columns.timestamp].as_ref().trim();
        let ts: i64 = match ts_raw.parse::<i64>() {
            Ok(v) => v,
            // some venues send timestamps as floats
            Err(_) => ts_raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0)
                .map(|v| v as i64)
                .ok_or_else(|| format!("timestamp `{ts_raw}` is not an integer"))?,
        };
        Ok(CandleRecord {
            timestamp: self.timestamp_unit.to_seconds(ts),
            open: num(self.columns.open, "open")?,
            high: num(self.columns.high, "high")?,
            low: num(self.columns.low, "low")?,
            close: num(self.columns.close, "close")?,
            volume: num(self.columns.volume, "volume")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParseReport {
    /// validated records sorted by timestamp
    pub records: Vec<CandleRecord>,
    /// rows replaced by a later row with the same timestamp
    pub duplicates: usize,
    /// (line, reason) for rows failing the OHLC checks
    pub rejected: Vec<(u64, String)>,
}

/// Merges records by timestamp, later ones winning. Returns the sorted
/// records and the number of replaced rows.
pub fn dedup_candles(records: impl IntoIterator<Item = CandleRecord>) -> (Vec<CandleRecord>, usize) {
    let mut map = BTreeMap::new();
    let mut dups = 0;
    for r in records {
        if map.insert(r.timestamp, r).is_some() {
            dups += 1;
        }
    }
    (map.into_values().collect(), dups)
}

pub fn parse_candles_from_reader(reader: impl Read, schema: &CandleSchema) -> Result<ParseReport> {
    if !schema.delimiter.is_ascii() {
        return Err(Error::InvalidInput("delimiter must be ASCII".into()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .has_headers(schema.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    let mut rejected = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        let cells: Vec<&str> = rec.iter().collect();
        let candle = schema
            .record_from_cells(&cells)
            .map_err(|message| Error::Parse { line, message })?;
        match candle.validate() {
            Ok(()) => rows.push(candle),
            Err(reason) => rejected.push((line, reason)),
        }
    }
    if rows.is_empty() && rejected.is_empty() {
        log::warn!("candle source contained no rows");
    }
    if !rejected.is_empty() {
        log::warn!("rejected {} candle rows", rejected.len());
    }
    let (records, duplicates) = dedup_candles(rows);
    if duplicates > 0 {
        log::warn!("{duplicates} duplicate candle timestamps, last row kept");
    }
    Ok(ParseReport {
        records,
        duplicates,
        rejected,
    })
}

pub fn parse_candles(path: &Path, schema: &CandleSchema) -> Result<ParseReport> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_candles_from_reader(std::io::BufReader::new(file), schema)
}

/// Canonical text: header plus one `timestamp,open,high,low,close,volume`
/// row per candle, floats in shortest round-trip form.
pub fn candles_to_string(records: &[CandleRecord]) -> String {
    let mut s = String::from("timestamp,open,high,low,close,volume\n");
    for r in records {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.timestamp, r.open, r.high, r.low, r.close, r.volume
        ));
    }
    s
}

pub fn write_candles(path: &Path, records: &[CandleRecord]) -> Result<()> {
    crate::crosssection::cache::write_atomic(path, candles_to_string(records).as_bytes())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandleSeries {
    pub series: PriceSeries,
    pub interval_seconds: i64,
    /// (last timestamp before, first timestamp after) for each hole
    pub gaps: Vec<(Timestamp, Timestamp)>,
}

impl CandleSeries {
    pub fn missing_points(&self) -> i64 {
        self.gaps
            .iter()
            .map(|(a, b)| (b - a) / self.interval_seconds - 1)
            .sum()
    }
}

/// Price series from one candle field. The interval is the smallest spacing
/// unless `expected_interval` is given; holes are recorded, not filled.
pub fn to_price_series(
    asset_id: &str,
    candles: &[CandleRecord],
    field: PriceField,
    expected_interval: Option<i64>,
) -> Result<CandleSeries> {
    if candles.is_empty() {
        return Err(Error::InsufficientData(format!("{asset_id}: no candles")));
    }
    let (sorted, _) = dedup_candles(candles.iter().copied());
    let inferred = sorted.windows(2).map(|w| w[1].timestamp - w[0].timestamp).min();
    let interval = match (expected_interval, inferred) {
        (Some(e), Some(i)) if i < e => {
            return Err(Error::InvalidInput(format!(
                "{asset_id}: candles {i}s apart, finer than the declared {e}s interval"
            )))
        }
        (Some(e), _) => e,
        (None, Some(i)) => i,
        // a single candle has no spacing; any positive interval will do
        (None, None) => 1,
    };
    let mut gaps = Vec::new();
    for w in sorted.windows(2) {
        let d = w[1].timestamp - w[0].timestamp;
        if d % interval != 0 {
            return Err(Error::InvalidInput(format!(
                "{asset_id}: spacing {d}s at {} is not a multiple of {interval}s",
                w[1].timestamp
            )));
        }
        if d > interval {
            gaps.push((w[0].timestamp, w[1].timestamp));
        }
    }
    let points = sorted.iter().map(|c| (c.timestamp, c.field(field))).collect();
    Ok(CandleSeries {
        series: PriceSeries::new(asset_id, interval, points)?,
        interval_seconds: interval,
        gaps,
    })
}
