use serde::{Deserialize, Serialize};

use crate::od::flows::{FlowTable, HourStamp};
use crate::od::zones::ZoneTable;

/// Additive smoothing applied to every mass entry so logarithms stay finite
/// for zones with no observed trips (or no POIs).
pub const MASS_SMOOTHING: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassDefinition {
    /// Total training-period outflow per zone.
    FlowOut,
    /// Total training-period inflow per zone.
    FlowIn,
    /// Static total POI count per zone.
    PoiTotal,
}

/// Per-zone positive mass, addressed by zone index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MassVector {
    pub definition: MassDefinition,
    values: Vec<f64>,
    /// Flow-based masses only ever see rows before the training boundary.
    pub train_only: bool,
}

impl MassVector {
    pub fn from_values(definition: MassDefinition, values: Vec<f64>, train_only: bool) -> Self {
        debug_assert!(values.iter().all(|&v| v > 0.0));
        Self {
            definition,
            values,
            train_only,
        }
    }

    #[inline]
    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Replace the entries of `zone_idxs` with the smoothing floor; used by
    /// spatial holdouts where training flow for withheld zones is unknown.
    pub fn with_floored(&self, zone_idxs: &[usize]) -> Self {
        let mut values = self.values.clone();
        for &i in zone_idxs {
            values[i] = MASS_SMOOTHING;
        }
        Self {
            definition: self.definition,
            values,
            train_only: self.train_only,
        }
    }

    /// Replace the entries of `zone_idxs` with supplied values (e.g. borough
    /// means), keeping everything else.
    pub fn with_imputed(&self, imputed: &[(usize, f64)]) -> Self {
        let mut values = self.values.clone();
        for &(i, v) in imputed {
            values[i] = v.max(MASS_SMOOTHING);
        }
        Self {
            definition: self.definition,
            values,
            train_only: self.train_only,
        }
    }
}

/// Build a smoothed per-zone mass vector. Flow-based definitions sum flows
/// strictly before `train_end`; the POI definition ignores flows entirely.
pub fn make_masses(
    flows: &FlowTable,
    zones: &ZoneTable,
    definition: MassDefinition,
    train_end: HourStamp,
) -> MassVector {
    let n = zones.len();
    let mut values = vec![0.0f64; n];
    match definition {
        MassDefinition::FlowOut | MassDefinition::FlowIn => {
            for row in flows.rows() {
                if row.hour >= train_end {
                    continue;
                }
                let zone = match definition {
                    MassDefinition::FlowOut => row.origin,
                    _ => row.dest,
                };
                if let Some(idx) = zones.index_of(zone) {
                    values[idx] += f64::from(row.flow);
                }
            }
        }
        MassDefinition::PoiTotal => {
            for (i, v) in values.iter_mut().enumerate() {
                *v = f64::from(zones.zone(i).poi.total());
            }
        }
    }
    for v in values.iter_mut() {
        *v += MASS_SMOOTHING;
    }
    MassVector::from_values(definition, values, true)
}
