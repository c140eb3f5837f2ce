use std::path::Path;

use chrono::{DateTime, Datelike, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::od::zones::ZoneId;

/// A timestamp truncated to the hour, stored as whole hours since the Unix
/// epoch (UTC). Cheap to compare and to bucket by calendar features.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct HourStamp(pub i64);

impl HourStamp {
    pub fn from_datetime(dt: NaiveDateTime) -> Self {
        HourStamp(dt.and_utc().timestamp().div_euclid(3600))
    }

    pub fn to_datetime(self) -> NaiveDateTime {
        DateTime::from_timestamp(self.0 * 3600, 0)
            .expect("hour stamp in datetime range")
            .naive_utc()
    }

    /// Parse `YYYY-mm-ddTHH:MM:SS` or `YYYY-mm-dd HH:MM:SS`, truncating to
    /// the hour.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        let dt = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S")
            .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S"))
            .ok()?;
        Some(Self::from_datetime(dt))
    }

    pub fn plus_hours(self, hours: i64) -> Self {
        HourStamp(self.0 + hours)
    }

    /// Hour of day in `[0, 24)`.
    pub fn hour_of_day(self) -> u32 {
        self.0.rem_euclid(24) as u32
    }

    /// Day of week with Monday = 0 ... Sunday = 6.
    pub fn day_of_week(self) -> u32 {
        // 1970-01-01 was a Thursday (3 in Monday-based numbering).
        (self.0.div_euclid(24) + 3).rem_euclid(7) as u32
    }

    /// Calendar month in `[1, 12]`.
    pub fn month(self) -> u32 {
        self.to_datetime().month()
    }

    pub fn is_weekend(self) -> bool {
        self.day_of_week() >= 5
    }

    /// `24 * day_of_week + hour_of_day`, in `[0, 168)`.
    pub fn hour_of_week(self) -> u32 {
        24 * self.day_of_week() + self.hour_of_day()
    }
}

impl std::fmt::Display for HourStamp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.to_datetime().format("%Y-%m-%dT%H:%M:%S"))
    }
}

/// One observed OD cell: trips from `origin` to `dest` during `hour`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowRow {
    pub origin: ZoneId,
    pub dest: ZoneId,
    pub hour: HourStamp,
    pub flow: u32,
}

impl FlowRow {
    fn key(&self) -> (ZoneId, ZoneId, HourStamp) {
        (self.origin, self.dest, self.hour)
    }
}

/// Sparse hourly OD observations, sorted by (origin, dest, hour) with exactly
/// one row per key.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FlowTable {
    rows: Vec<FlowRow>,
}

impl FlowTable {
    /// Build from rows, sorting canonically and summing duplicate keys.
    pub fn from_rows(mut rows: Vec<FlowRow>) -> Self {
        rows.sort_by_key(|r| r.key());
        let mut merged: Vec<FlowRow> = Vec::with_capacity(rows.len());
        for row in rows {
            match merged.last_mut() {
                Some(last) if last.key() == row.key() => last.flow += row.flow,
                _ => merged.push(row),
            }
        }
        Self { rows: merged }
    }

    pub fn rows(&self) -> &[FlowRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, idx: usize) -> &FlowRow {
        &self.rows[idx]
    }

    pub fn total_flow(&self) -> u64 {
        self.rows.iter().map(|r| u64::from(r.flow)).sum()
    }

    /// Distinct hour stamps present, ascending.
    pub fn distinct_hours(&self) -> Vec<HourStamp> {
        let mut hours: Vec<HourStamp> = self.rows.iter().map(|r| r.hour).collect();
        hours.sort();
        hours.dedup();
        hours
    }

    /// Hours strictly before `end`, ascending.
    pub fn distinct_hours_before(&self, end: HourStamp) -> Vec<HourStamp> {
        let mut hours: Vec<HourStamp> = self
            .rows
            .iter()
            .filter(|r| r.hour < end)
            .map(|r| r.hour)
            .collect();
        hours.sort();
        hours.dedup();
        hours
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let file = path.display().to_string();
        let headers = reader.headers()?.clone();
        let mut col = std::collections::HashMap::new();
        for name in ["origin", "dest", "hour", "flow"] {
            match headers.iter().position(|h| h == name) {
                Some(i) => {
                    col.insert(name, i);
                }
                None => {
                    return Err(Error::MissingColumn {
                        file,
                        column: name.to_string(),
                    })
                }
            }
        }
        let mut rows = Vec::new();
        for (row_no, record) in reader.records().enumerate() {
            let record = record?;
            let get = |name: &str| record.get(col[name]).unwrap_or("").trim();
            let bad = |message: String| Error::BadRecord {
                file: path.display().to_string(),
                row: row_no + 2,
                message,
            };
            let origin: u32 = get("origin")
                .parse()
                .map_err(|_| bad(format!("bad origin `{}`", get("origin"))))?;
            let dest: u32 = get("dest")
                .parse()
                .map_err(|_| bad(format!("bad dest `{}`", get("dest"))))?;
            let hour = HourStamp::parse(get("hour"))
                .ok_or_else(|| bad(format!("bad hour `{}`", get("hour"))))?;
            let flow: u32 = get("flow")
                .parse()
                .map_err(|_| bad(format!("bad flow `{}`", get("flow"))))?;
            rows.push(FlowRow {
                origin: ZoneId(origin),
                dest: ZoneId(dest),
                hour,
                flow,
            });
        }
        Ok(Self::from_rows(rows))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["origin", "dest", "hour", "flow"])?;
        for r in &self.rows {
            writer.write_record([
                r.origin.to_string(),
                r.dest.to_string(),
                r.hour.to_string(),
                r.flow.to_string(),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }
}
