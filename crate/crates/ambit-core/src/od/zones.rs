use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// External identifier of a zone, as found in trip and zone files.
///
/// Distinct from the dense `usize` index used to address matrices; use
/// [`ZoneTable::index_of`] to translate.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct ZoneId(pub u32);

impl std::fmt::Display for ZoneId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoiCategory {
    Amenity,
    Shop,
    Office,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct PoiCounts {
    pub amenity: u32,
    pub shop: u32,
    pub office: u32,
}

impl PoiCounts {
    pub fn get(&self, category: PoiCategory) -> u32 {
        match category {
            PoiCategory::Amenity => self.amenity,
            PoiCategory::Shop => self.shop,
            PoiCategory::Office => self.office,
        }
    }

    pub fn total(&self) -> u32 {
        self.amenity + self.shop + self.office
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Zone {
    pub id: ZoneId,
    /// Projected centroid, meters.
    pub centroid_x_m: f64,
    pub centroid_y_m: f64,
    pub area_km2: f64,
    pub borough: String,
    pub poi: PoiCounts,
}

impl Zone {
    pub fn poi_density(&self, category: PoiCategory) -> f64 {
        f64::from(self.poi.get(category)) / self.area_km2
    }

    /// Total POI count per square kilometer.
    pub fn poi_density_total(&self) -> f64 {
        f64::from(self.poi.total()) / self.area_km2
    }
}

/// Immutable zone registry. Zone ids are unique; rows are kept in insertion
/// order and addressed by dense index everywhere a matrix is involved.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZoneTable {
    zones: Vec<Zone>,
    #[serde(skip)]
    index: HashMap<ZoneId, usize>,
}

impl ZoneTable {
    pub fn new(zones: Vec<Zone>) -> Result<Self> {
        let mut index = HashMap::with_capacity(zones.len());
        for (i, z) in zones.iter().enumerate() {
            if !(z.area_km2 > 0.0) {
                return Err(Error::InvalidZones(format!(
                    "zone {} has non-positive area {}",
                    z.id, z.area_km2
                )));
            }
            if !z.centroid_x_m.is_finite() || !z.centroid_y_m.is_finite() {
                return Err(Error::InvalidZones(format!(
                    "zone {} has non-finite centroid",
                    z.id
                )));
            }
            if index.insert(z.id, i).is_some() {
                return Err(Error::InvalidZones(format!("duplicate zone id {}", z.id)));
            }
        }
        Ok(Self { zones, index })
    }

    pub fn len(&self) -> usize {
        self.zones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zones.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Zone> {
        self.zones.iter()
    }

    pub fn zone(&self, idx: usize) -> &Zone {
        &self.zones[idx]
    }

    pub fn index_of(&self, id: ZoneId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn id_at(&self, idx: usize) -> ZoneId {
        self.zones[idx].id
    }

    /// Distinct borough labels in sorted order.
    pub fn boroughs(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.zones.iter().map(|z| z.borough.clone()).collect();
        labels.sort();
        labels.dedup();
        labels
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let file = path.display().to_string();
        let headers = reader.headers()?.clone();
        let required = [
            "zone_id",
            "centroid_x_m",
            "centroid_y_m",
            "area_km2",
            "borough",
            "poi_amenity",
            "poi_shop",
            "poi_office",
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
        let mut zones = Vec::new();
        for (row_no, record) in reader.records().enumerate() {
            let record = record?;
            let field = |name: &str| record.get(col[name]).unwrap_or("").trim().to_string();
            let parse_f64 = |name: &str| -> Result<f64> {
                field(name).parse().map_err(|_| Error::BadRecord {
                    file: path.display().to_string(),
                    row: row_no + 2,
                    message: format!("bad {name} value `{}`", field(name)),
                })
            };
            let parse_u32 = |name: &str| -> Result<u32> {
                field(name).parse().map_err(|_| Error::BadRecord {
                    file: path.display().to_string(),
                    row: row_no + 2,
                    message: format!("bad {name} value `{}`", field(name)),
                })
            };
            zones.push(Zone {
                id: ZoneId(parse_u32("zone_id")?),
                centroid_x_m: parse_f64("centroid_x_m")?,
                centroid_y_m: parse_f64("centroid_y_m")?,
                area_km2: parse_f64("area_km2")?,
                borough: field("borough"),
                poi: PoiCounts {
                    amenity: parse_u32("poi_amenity")?,
                    shop: parse_u32("poi_shop")?,
                    office: parse_u32("poi_office")?,
                },
            });
        }
        Self::new(zones)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record([
            "zone_id",
            "centroid_x_m",
            "centroid_y_m",
            "area_km2",
            "borough",
            "poi_amenity",
            "poi_shop",
            "poi_office",
        ])?;
        for z in &self.zones {
            writer.write_record([
                z.id.to_string(),
                format!("{:.3}", z.centroid_x_m),
                format!("{:.3}", z.centroid_y_m),
                format!("{:.6}", z.area_km2),
                z.borough.clone(),
                z.poi.amenity.to_string(),
                z.poi.shop.to_string(),
                z.poi.office.to_string(),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zone(id: u32, area: f64) -> Zone {
        Zone {
            id: ZoneId(id),
            centroid_x_m: 0.0,
            centroid_y_m: 0.0,
            area_km2: area,
            borough: "B0".into(),
            poi: PoiCounts {
                amenity: 10,
                shop: 4,
                office: 2,
            },
        }
    }

    #[test]
    fn rejects_duplicate_ids() {
        let err = ZoneTable::new(vec![zone(1, 1.0), zone(1, 2.0)]).unwrap_err();
        assert!(err.to_string().contains("duplicate zone id"));
    }

    #[test]
    fn rejects_non_positive_area() {
        assert!(ZoneTable::new(vec![zone(1, 0.0)]).is_err());
        assert!(ZoneTable::new(vec![zone(1, -3.0)]).is_err());
    }

    #[test]
    fn density_is_count_over_area() {
        let z = zone(1, 4.0);
        assert_eq!(z.poi_density(PoiCategory::Amenity), 2.5);
        assert_eq!(z.poi_density_total(), 4.0);
    }
}
