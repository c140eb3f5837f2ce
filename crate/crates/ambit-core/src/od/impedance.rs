use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::od::ingest::TripRecord;
use crate::od::zones::ZoneTable;

/// Lower bound on any impedance entry. Keeps power-law decay finite for
/// intra-zone pairs and coincident centroids.
pub const DISTANCE_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpedanceSource {
    /// Straight-line centroid distance, km.
    EuclideanCentroid,
    /// Median observed trip duration, minutes, with a constant-speed
    /// fallback for unobserved pairs.
    TravelTimeProxy,
}

/// Dense pairwise impedance between zones, addressed by zone index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImpedanceMatrix {
    n: usize,
    values: Vec<f64>,
    pub source: ImpedanceSource,
    /// Fraction of OD pairs with a direct estimate (1.0 for Euclidean).
    pub coverage: f64,
}

impl ImpedanceMatrix {
    pub fn n_zones(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.values[from * self.n + to]
    }
}

/// Build the pairwise impedance matrix for `zones`.
///
/// `trips` is only consulted for [`ImpedanceSource::TravelTimeProxy`].
pub fn build_impedance(
    zones: &ZoneTable,
    source: ImpedanceSource,
    trips: Option<&[TripRecord]>,
) -> Result<ImpedanceMatrix> {
    if zones.is_empty() {
        return Err(Error::Empty("impedance over zero zones".into()));
    }
    match source {
        ImpedanceSource::EuclideanCentroid => Ok(build_euclidean(zones)),
        ImpedanceSource::TravelTimeProxy => {
            let trips = trips.ok_or_else(|| {
                Error::InvalidConfig("travel-time impedance requires trip records".into())
            })?;
            build_travel_time(zones, trips)
        }
    }
}

fn build_euclidean(zones: &ZoneTable) -> ImpedanceMatrix {
    let n = zones.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        let zi = zones.zone(i);
        for j in 0..n {
            let zj = zones.zone(j);
            let dx = zi.centroid_x_m - zj.centroid_x_m;
            let dy = zi.centroid_y_m - zj.centroid_y_m;
            let km = (dx * dx + dy * dy).sqrt() / 1000.0;
            values[i * n + j] = km.max(DISTANCE_FLOOR);
        }
    }
    ImpedanceMatrix {
        n,
        values,
        source: ImpedanceSource::EuclideanCentroid,
        coverage: 1.0,
    }
}

/// Median trip duration per directed pair where observed; otherwise
/// Euclidean distance scaled by the overall median pace (minutes per km).
fn build_travel_time(zones: &ZoneTable, trips: &[TripRecord]) -> Result<ImpedanceMatrix> {
    let n = zones.len();
    let euclid = build_euclidean(zones);
    let mut durations: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    let mut paces: Vec<f64> = Vec::new();
    for trip in trips {
        let (Some(i), Some(j)) = (zones.index_of(trip.pu_zone), zones.index_of(trip.do_zone))
        else {
            continue;
        };
        if trip.trip_minutes > 0.0 {
            durations.entry((i, j)).or_default().push(trip.trip_minutes);
            if trip.trip_km > 0.0 {
                paces.push(trip.trip_minutes / trip.trip_km);
            }
        }
    }
    if durations.is_empty() {
        return Err(Error::Empty(
            "no usable trips for travel-time impedance".into(),
        ));
    }
    let pace = median(&mut paces);
    let mut values = vec![0.0; n * n];
    let mut covered = 0usize;
    for i in 0..n {
        for j in 0..n {
            let minutes = match durations.get_mut(&(i, j)) {
                Some(samples) => {
                    covered += 1;
                    median(samples)
                }
                None => euclid.get(i, j) * pace,
            };
            values[i * n + j] = minutes.max(DISTANCE_FLOOR);
        }
    }
    Ok(ImpedanceMatrix {
        n,
        values,
        source: ImpedanceSource::TravelTimeProxy,
        coverage: covered as f64 / (n * n) as f64,
    })
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let m = samples.len();
    if m % 2 == 1 {
        samples[m / 2]
    } else {
        0.5 * (samples[m / 2 - 1] + samples[m / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::od::zones::{PoiCounts, Zone, ZoneId};

    fn zone(id: u32, x: f64, y: f64) -> Zone {
        Zone {
            id: ZoneId(id),
            centroid_x_m: x,
            centroid_y_m: y,
            area_km2: 1.0,
            borough: "B0".into(),
            poi: PoiCounts::default(),
        }
    }

    #[test]
    fn euclidean_is_three_four_five() {
        let zones = ZoneTable::new(vec![zone(1, 0.0, 0.0), zone(2, 3000.0, 4000.0)]).unwrap();
        let m = build_impedance(&zones, ImpedanceSource::EuclideanCentroid, None).unwrap();
        assert!((m.get(0, 1) - 5.0).abs() < 1e-12);
        assert_eq!(m.get(0, 1), m.get(1, 0));
        assert_eq!(m.coverage, 1.0);
    }

    #[test]
    fn coincident_centroids_hit_the_floor() {
        let zones = ZoneTable::new(vec![zone(1, 10.0, 10.0), zone(2, 10.0, 10.0)]).unwrap();
        let m = build_impedance(&zones, ImpedanceSource::EuclideanCentroid, None).unwrap();
        assert_eq!(m.get(0, 0), DISTANCE_FLOOR);
        assert_eq!(m.get(0, 1), DISTANCE_FLOOR);
    }

    #[test]
    fn zero_zones_is_an_error() {
        let zones = ZoneTable::new(vec![]).unwrap();
        assert!(build_impedance(&zones, ImpedanceSource::EuclideanCentroid, None).is_err());
    }

    #[test]
    fn travel_time_matches_constant_speed() {
        // trips at a constant 30 km/h: proxy must be proportional to distance
        let zones = ZoneTable::new(vec![
            zone(1, 0.0, 0.0),
            zone(2, 6000.0, 0.0),
            zone(3, 0.0, 12000.0),
        ])
        .unwrap();
        let mk = |pu: u32, doz: u32, km: f64| TripRecord {
            pickup_datetime: chrono::NaiveDateTime::parse_from_str(
                "2025-01-06T08:00:00",
                "%Y-%m-%dT%H:%M:%S",
            )
            .unwrap(),
            dropoff_datetime: chrono::NaiveDateTime::parse_from_str(
                "2025-01-06T09:00:00",
                "%Y-%m-%dT%H:%M:%S",
            )
            .unwrap(),
            pu_zone: ZoneId(pu),
            do_zone: ZoneId(doz),
            trip_minutes: km * 2.0, // 2 min/km
            trip_km: km,
        };
        let trips = vec![mk(1, 2, 6.0), mk(1, 2, 6.0), mk(1, 3, 12.0)];
        let m = build_impedance(&zones, ImpedanceSource::TravelTimeProxy, Some(&trips)).unwrap();
        // observed pairs: direct medians
        assert!((m.get(0, 1) - 12.0).abs() < 1e-9);
        assert!((m.get(0, 2) - 24.0).abs() < 1e-9);
        // unobserved pair falls back to euclidean * median pace (2 min/km)
        let d12 = ((6.0f64).powi(2) + (12.0f64).powi(2)).sqrt();
        assert!((m.get(1, 2) - d12 * 2.0).abs() < 1e-9);
        assert!((m.coverage - 2.0 / 9.0).abs() < 1e-12);
    }
}
