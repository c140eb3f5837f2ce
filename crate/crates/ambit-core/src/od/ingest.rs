use std::collections::HashMap;
use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::od::flows::{FlowRow, FlowTable, HourStamp};
use crate::od::zones::{ZoneId, ZoneTable};

/// One raw trip record as read from `trips.csv`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TripRecord {
    pub pickup_datetime: NaiveDateTime,
    pub dropoff_datetime: NaiveDateTime,
    pub pu_zone: ZoneId,
    pub do_zone: ZoneId,
    pub trip_minutes: f64,
    pub trip_km: f64,
}

/// Duration/distance bounds applied before aggregation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TripFilters {
    pub min_minutes: f64,
    pub max_minutes: f64,
    pub min_km: f64,
    pub max_km: f64,
}

impl Default for TripFilters {
    fn default() -> Self {
        Self {
            min_minutes: 1.0,
            max_minutes: 180.0,
            min_km: 0.1,
            max_km: 100.0,
        }
    }
}

impl TripFilters {
    fn validate(&self) -> Result<()> {
        if self.min_minutes <= 0.0
            || self.max_minutes < self.min_minutes
            || self.min_km <= 0.0
            || self.max_km < self.min_km
        {
            return Err(Error::InvalidConfig(format!(
                "trip filter bounds must be positive and ordered: {self:?}"
            )));
        }
        Ok(())
    }

    fn accepts(&self, trip: &TripRecord) -> bool {
        trip.trip_minutes >= self.min_minutes
            && trip.trip_minutes <= self.max_minutes
            && trip.trip_km >= self.min_km
            && trip.trip_km <= self.max_km
    }
}

/// Per-category tally of what aggregation did with the input trips.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: u64,
    pub accepted: u64,
    pub rejected_duration: u64,
    pub rejected_distance: u64,
    pub rejected_unknown_zone: u64,
}

impl IngestReport {
    pub fn rejects(&self) -> u64 {
        self.rejected_duration + self.rejected_distance + self.rejected_unknown_zone
    }
}

/// Aggregate already-parsed trips into hourly OD flows.
///
/// Trips failing the duration/distance bounds are dropped; trips whose pickup
/// or dropoff zone is not in `zones` are tallied as rejects. The output is
/// canonically ordered by (origin, dest, hour).
pub fn ingest_trip_records<I>(
    trips: I,
    zones: &ZoneTable,
    filters: &TripFilters,
) -> Result<(FlowTable, IngestReport)>
where
    I: IntoIterator<Item = TripRecord>,
{
    filters.validate()?;
    let mut report = IngestReport::default();
    let mut cells: HashMap<(ZoneId, ZoneId, HourStamp), u32> = HashMap::new();
    for trip in trips {
        report.rows_read += 1;
        if trip.trip_minutes < filters.min_minutes || trip.trip_minutes > filters.max_minutes {
            report.rejected_duration += 1;
            continue;
        }
        if trip.trip_km < filters.min_km || trip.trip_km > filters.max_km {
            report.rejected_distance += 1;
            continue;
        }
        if zones.index_of(trip.pu_zone).is_none() || zones.index_of(trip.do_zone).is_none() {
            report.rejected_unknown_zone += 1;
            continue;
        }
        debug_assert!(filters.accepts(&trip));
        report.accepted += 1;
        let hour = HourStamp::from_datetime(trip.pickup_datetime);
        *cells.entry((trip.pu_zone, trip.do_zone, hour)).or_default() += 1;
    }
    let rows = cells
        .into_iter()
        .map(|((origin, dest, hour), flow)| FlowRow {
            origin,
            dest,
            hour,
            flow,
        })
        .collect();
    Ok((FlowTable::from_rows(rows), report))
}

/// Read and aggregate a trip CSV in one pass.
pub fn ingest_trips(
    path: &Path,
    zones: &ZoneTable,
    filters: &TripFilters,
) -> Result<(FlowTable, IngestReport)> {
    let trips = read_trips_csv(path)?;
    ingest_trip_records(trips, zones, filters)
}

/// Parse `trips.csv` with columns
/// `pickup_datetime,dropoff_datetime,pu_zone,do_zone,trip_minutes,trip_km`.
pub fn read_trips_csv(path: &Path) -> Result<Vec<TripRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let file = path.display().to_string();
    let headers = reader.headers()?.clone();
    let required = [
        "pickup_datetime",
        "dropoff_datetime",
        "pu_zone",
        "do_zone",
        "trip_minutes",
        "trip_km",
    ];
    let mut col = HashMap::new();
    for name in required {
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
    let mut trips = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let get = |name: &str| record.get(col[name]).unwrap_or("").trim();
        let bad = |message: String| Error::BadRecord {
            file: path.display().to_string(),
            row: row_no + 2,
            message,
        };
        let parse_dt = |name: &str| -> Result<NaiveDateTime> {
            let s = get(name);
            NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S")
                .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S"))
                .map_err(|_| bad(format!("bad {name} `{s}`")))
        };
        let parse_f64 = |name: &str| -> Result<f64> {
            get(name)
                .parse()
                .map_err(|_| bad(format!("bad {name} `{}`", get(name))))
        };
        let parse_zone = |name: &str| -> Result<ZoneId> {
            get(name)
                .parse::<u32>()
                .map(ZoneId)
                .map_err(|_| bad(format!("bad {name} `{}`", get(name))))
        };
        trips.push(TripRecord {
            pickup_datetime: parse_dt("pickup_datetime")?,
            dropoff_datetime: parse_dt("dropoff_datetime")?,
            pu_zone: parse_zone("pu_zone")?,
            do_zone: parse_zone("do_zone")?,
            trip_minutes: parse_f64("trip_minutes")?,
            trip_km: parse_f64("trip_km")?,
        });
    }
    Ok(trips)
}
