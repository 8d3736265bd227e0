//! The per-asset stylized-facts row and its column catalogue.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::timeseries::Timestamp;

/// A statistic that is either computed or explicitly absent with a reason
/// code. Absence is never encoded as a number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Stat {
    Value(f64),
    Absent(String),
}

impl Stat {
    pub fn value(&self) -> Option<f64> {
        match self {
            Stat::Value(v) => Some(*v),
            Stat::Absent(_) => None,
        }
    }

    pub fn absent(code: impl Into<String>) -> Self {
        Stat::Absent(code.into())
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        if let Some(code) = s.strip_prefix("NA:") {
            return Ok(Stat::Absent(code.to_string()));
        }
        s.parse::<f64>()
            .map(Stat::Value)
            .map_err(|_| format!("`{s}` is neither a number nor NA:<reason>"))
    }
}

impl fmt::Display for Stat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stat::Value(v) => write!(f, "{v}"),
            Stat::Absent(code) => write!(f, "NA:{code}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StylizedFactsRow {
    pub asset_id: String,
    pub sector: String,
    pub history_start: Timestamp,
    pub history_end: Timestamp,
    /// percent of exactly-zero base-interval returns
    pub zeros_pct: Stat,
    pub avg_acf_1_24: Stat,
    pub avg_acf_else: Stat,
    pub volclust_slope: Stat,
    pub volclust_intercept: Stat,
    pub avg_lev_pos: Stat,
    pub avg_lev_neg: Stat,
    pub tra_ini: Stat,
    pub tra_fin: Stat,
    pub cdf_tail_right: Stat,
    pub cdf_tail_left: Stat,
    pub jb_slope: Stat,
    /// quality notes such as `cdf_tail_right:low_r2`
    pub flags: Vec<String>,
}

/// Numeric columns of the row, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactColumn {
    ZerosPct,
    AvgAcf124,
    AvgAcfElse,
    VolclustSlope,
    VolclustIntercept,
    AvgLevPos,
    AvgLevNeg,
    TraIni,
    TraFin,
    CdfTailRight,
    CdfTailLeft,
    JbSlope,
}

impl FactColumn {
    pub const ALL: [FactColumn; 12] = [
        FactColumn::ZerosPct,
        FactColumn::AvgAcf124,
        FactColumn::AvgAcfElse,
        FactColumn::VolclustSlope,
        FactColumn::VolclustIntercept,
        FactColumn::AvgLevPos,
        FactColumn::AvgLevNeg,
        FactColumn::TraIni,
        FactColumn::TraFin,
        FactColumn::CdfTailRight,
        FactColumn::CdfTailLeft,
        FactColumn::JbSlope,
    ];

    /// Every column after the zero-return percentage, optionally with it.
    pub fn clustering_default(include_zeros: bool) -> Vec<FactColumn> {
        Self::ALL
            .into_iter()
            .filter(|c| include_zeros || *c != FactColumn::ZerosPct)
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            FactColumn::ZerosPct => "zeros_pct",
            FactColumn::AvgAcf124 => "avg_acf_1_24",
            FactColumn::AvgAcfElse => "avg_acf_else",
            FactColumn::VolclustSlope => "volclust_slope",
            FactColumn::VolclustIntercept => "volclust_intercept",
            FactColumn::AvgLevPos => "avg_lev_pos",
            FactColumn::AvgLevNeg => "avg_lev_neg",
            FactColumn::TraIni => "tra_ini",
            FactColumn::TraFin => "tra_fin",
            FactColumn::CdfTailRight => "cdf_tail_right",
            FactColumn::CdfTailLeft => "cdf_tail_left",
            FactColumn::JbSlope => "jb_slope",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn get(self, row: &StylizedFactsRow) -> &Stat {
        match self {
            FactColumn::ZerosPct => &row.zeros_pct,
            FactColumn::AvgAcf124 => &row.avg_acf_1_24,
            FactColumn::AvgAcfElse => &row.avg_acf_else,
            FactColumn::VolclustSlope => &row.volclust_slope,
            FactColumn::VolclustIntercept => &row.volclust_intercept,
            FactColumn::AvgLevPos => &row.avg_lev_pos,
            FactColumn::AvgLevNeg => &row.avg_lev_neg,
            FactColumn::TraIni => &row.tra_ini,
            FactColumn::TraFin => &row.tra_fin,
            FactColumn::CdfTailRight => &row.cdf_tail_right,
            FactColumn::CdfTailLeft => &row.cdf_tail_left,
            FactColumn::JbSlope => &row.jb_slope,
        }
    }

    fn get_mut(self, row: &mut StylizedFactsRow) -> &mut Stat {
        match self {
            FactColumn::ZerosPct => &mut row.zeros_pct,
            FactColumn::AvgAcf124 => &mut row.avg_acf_1_24,
            FactColumn::AvgAcfElse => &mut row.avg_acf_else,
            FactColumn::VolclustSlope => &mut row.volclust_slope,
            FactColumn::VolclustIntercept => &mut row.volclust_intercept,
            FactColumn::AvgLevPos => &mut row.avg_lev_pos,
            FactColumn::AvgLevNeg => &mut row.avg_lev_neg,
            FactColumn::TraIni => &mut row.tra_ini,
            FactColumn::TraFin => &mut row.tra_fin,
            FactColumn::CdfTailRight => &mut row.cdf_tail_right,
            FactColumn::CdfTailLeft => &mut row.cdf_tail_left,
            FactColumn::JbSlope => &mut row.jb_slope,
        }
    }
}

impl StylizedFactsRow {
    /// A row with every statistic absent under `code`.
    pub fn empty(asset_id: &str, sector: &str, start: Timestamp, end: Timestamp, code: &str) -> Self {
        let a = || Stat::absent(code);
        Self {
            asset_id: asset_id.to_string(),
            sector: sector.to_string(),
            history_start: start,
            history_end: end,
            zeros_pct: a(),
            avg_acf_1_24: a(),
            avg_acf_else: a(),
            volclust_slope: a(),
            volclust_intercept: a(),
            avg_lev_pos: a(),
            avg_lev_neg: a(),
            tra_ini: a(),
            tra_fin: a(),
            cdf_tail_right: a(),
            cdf_tail_left: a(),
            jb_slope: a(),
            flags: Vec::new(),
        }
    }

    pub fn set(&mut self, column: FactColumn, stat: Stat) {
        *column.get_mut(self) = stat;
    }

    pub fn header() -> Vec<&'static str> {
        let mut h = vec!["asset_id", "sector", "history_start", "history_end"];
        h.extend(FactColumn::ALL.iter().map(|c| c.name()));
        h.push("flags");
        h
    }

    pub fn to_record(&self) -> Vec<String> {
        let mut r = vec![
            self.asset_id.clone(),
            self.sector.clone(),
            self.history_start.to_string(),
            self.history_end.to_string(),
        ];
        r.extend(FactColumn::ALL.iter().map(|c| c.get(self).to_string()));
        r.push(self.flags.join(";"));
        r
    }

    pub fn from_record(fields: &[&str]) -> Result<Self, String> {
        let header = Self::header();
        if fields.len() != header.len() {
            return Err(format!(
                "expected {} fields, found {}",
                header.len(),
                fields.len()
            ));
        }
        let start = fields[2]
            .parse()
            .map_err(|_| format!("bad history_start `{}`", fields[2]))?;
        let end = fields[3]
            .parse()
            .map_err(|_| format!("bad history_end `{}`", fields[3]))?;
        let mut row = Self::empty(fields[0], fields[1], start, end, "unset");
        for (i, c) in FactColumn::ALL.iter().enumerate() {
            row.set(*c, Stat::parse(fields[4 + i])?);
        }
        let flags = fields[4 + FactColumn::ALL.len()];
        row.flags = if flags.is_empty() {
            Vec::new()
        } else {
            flags.split(';').map(str::to_string).collect()
        };
        Ok(row)
    }
}
