//! Task assembly: everything a model needs to fit and predict, built once
//! from a zone table and a flow table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::od::{
    build_impedance, filter_od_pairs, make_masses, split_and_sample, FlowTable, HourStamp,
    ImpedanceMatrix, ImpedanceSource, MassDefinition, MassVector, PairSet, SplitIndices,
    SplitSpec, TripRecord, ZoneTable, MASS_SMOOTHING,
};
use crate::spatial::MarginSet;

/// Names of the shared feature columns, in emission order.
pub const BASE_FEATURES: [&str; 10] = [
    "distance_km",
    "o_poi_density",
    "d_poi_density",
    "o_area_km2",
    "d_area_km2",
    "hour_of_day",
    "day_of_week",
    "month",
    "is_weekend",
    "hour_of_week",
];

/// Name of the optional baseline-prediction feature column.
pub const BASE_PREDICTION_FEATURE: &str = "log1p_baseline";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskConfig {
    pub min_total: u64,
    pub top_k: usize,
    pub split: SplitSpec,
    pub impedance: ImpedanceSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// An assembled prediction task. Immutable after construction; models read
/// from it and never write back.
#[derive(Debug, Clone)]
pub struct Task {
    pub zones: ZoneTable,
    /// Unfiltered flows; margins and zero augmentation draw from these.
    pub flows_full: FlowTable,
    /// Flows restricted to the surviving OD pairs; split indices point here.
    pub flows: FlowTable,
    pub pairs: PairSet,
    pub impedance: ImpedanceMatrix,
    pub split: SplitIndices,
    pub config: TaskConfig,
    pub mass_flow_out: MassVector,
    pub mass_flow_in: MassVector,
    pub mass_poi: MassVector,
    /// Margins per (zone, hour-of-day), from the full train-period matrix.
    pub margins: MarginSet,
    /// Mean hourly train-period outflow per zone (radiation and the
    /// opportunity models scale by it).
    pub mean_outflow: Vec<f64>,
    /// Per task-row (origin_idx, dest_idx), precomputed.
    cells: Vec<(u32, u32)>,
}

impl Task {
    pub fn build(
        zones: ZoneTable,
        flows_full: FlowTable,
        config: TaskConfig,
        trips: Option<&[TripRecord]>,
    ) -> Result<Self> {
        if zones.is_empty() {
            return Err(Error::Empty("task needs at least one zone".into()));
        }
        let impedance = build_impedance(&zones, config.impedance, trips)?;
        let (flows, pairs) =
            filter_od_pairs(&flows_full, config.min_total, config.top_k, config.split.train_end)?;
        let split = split_and_sample(&flows, &config.split)?;
        let train_end = config.split.train_end;
        let mass_flow_out = make_masses(&flows_full, &zones, MassDefinition::FlowOut, train_end);
        let mass_flow_in = make_masses(&flows_full, &zones, MassDefinition::FlowIn, train_end);
        let mass_poi = make_masses(&flows_full, &zones, MassDefinition::PoiTotal, train_end);
        let margins = MarginSet::compute(&flows_full, &zones, train_end);
        let mean_outflow = margins.mean_hourly_outflow();
        let cells = flows
            .rows()
            .iter()
            .map(|r| {
                let i = zones.index_of(r.origin).expect("origin in zone table") as u32;
                let j = zones.index_of(r.dest).expect("dest in zone table") as u32;
                (i, j)
            })
            .collect();
        Ok(Self {
            zones,
            flows_full,
            flows,
            pairs,
            impedance,
            split,
            config,
            mass_flow_out,
            mass_flow_in,
            mass_poi,
            margins,
            mean_outflow,
            cells,
        })
    }

    pub fn rows(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.split.train,
            Split::Val => &self.split.val,
            Split::Test => &self.split.test,
        }
    }

    pub fn mass(&self, definition: MassDefinition) -> &MassVector {
        match definition {
            MassDefinition::FlowOut => &self.mass_flow_out,
            MassDefinition::FlowIn => &self.mass_flow_in,
            MassDefinition::PoiTotal => &self.mass_poi,
        }
    }

    /// Observed flows for the given task rows.
    pub fn observed(&self, rows: &[usize]) -> Vec<f64> {
        rows.iter()
            .map(|&i| f64::from(self.flows.row(i).flow))
            .collect()
    }

    /// (origin_idx, dest_idx) for the given task rows.
    pub fn pair_cells<'a>(
        &'a self,
        rows: &'a [usize],
    ) -> impl Iterator<Item = (usize, usize)> + 'a {
        rows.iter().map(|&i| {
            let (o, d) = self.cells[i];
            (o as usize, d as usize)
        })
    }

    /// (origin_idx, dest_idx, hour_of_day) for the given task rows.
    pub fn hod_cells<'a>(
        &'a self,
        rows: &'a [usize],
    ) -> impl Iterator<Item = (usize, usize, usize)> + 'a {
        rows.iter().map(|&i| {
            let (o, d) = self.cells[i];
            (
                o as usize,
                d as usize,
                self.flows.row(i).hour.hour_of_day() as usize,
            )
        })
    }

    /// Hour stamps (raw i64 keys) for the given task rows.
    pub fn hour_keys(&self, rows: &[usize]) -> Vec<i64> {
        rows.iter().map(|&i| self.flows.row(i).hour.0).collect()
    }

    /// Shared feature matrix for the given rows, optionally with the
    /// log1p baseline prediction appended as a column.
    pub fn features(&self, rows: &[usize], baseline: Option<&[f64]>) -> Result<FeatureMatrix> {
        let n = rows.len();
        let mut columns: Vec<Vec<f64>> = (0..BASE_FEATURES.len())
            .map(|_| Vec::with_capacity(n))
            .collect();
        for &idx in rows {
            let row = self.flows.row(idx);
            let (o, d) = self.cells[idx];
            let (zo, zd) = (self.zones.zone(o as usize), self.zones.zone(d as usize));
            let h = row.hour;
            columns[0].push(self.impedance.get(o as usize, d as usize));
            columns[1].push(zo.poi_density_total());
            columns[2].push(zd.poi_density_total());
            columns[3].push(zo.area_km2);
            columns[4].push(zd.area_km2);
            columns[5].push(f64::from(h.hour_of_day()));
            columns[6].push(f64::from(h.day_of_week()));
            columns[7].push(f64::from(h.month()));
            columns[8].push(f64::from(u8::from(h.is_weekend())));
            columns[9].push(f64::from(h.hour_of_week()));
        }
        let mut matrix = FeatureMatrix::new(
            BASE_FEATURES.iter().map(|s| s.to_string()).collect(),
            columns,
        )?;
        if let Some(base) = baseline {
            if base.len() != n {
                return Err(Error::FeatureMismatch(format!(
                    "baseline column has {} rows, expected {n}",
                    base.len()
                )));
            }
            let col: Vec<f64> = base.iter().map(|b| b.max(0.0).ln_1p()).collect();
            matrix = matrix.with_column(BASE_PREDICTION_FEATURE, col)?;
        }
        Ok(matrix)
    }

    /// Zone indices touching a task row (origin or destination).
    pub fn row_touches(&self, row: usize, zone_set: &[bool]) -> bool {
        let (o, d) = self.cells[row];
        zone_set[o as usize] || zone_set[d as usize]
    }

    /// Rebuild the task for a spatial holdout: rows of the train and val
    /// windows touching held-out zones are dropped everywhere (masses,
    /// margins, outflows, split), the test window keeps only rows touching
    /// them, and flow-based masses for held-out zones follow the policy
    /// (smoothing floor, or borough means over surviving zones).
    pub fn with_spatial_holdout(
        &self,
        heldout_zone_idxs: &[usize],
        borough_imputed: bool,
    ) -> Result<Task> {
        let n = self.zones.len();
        let mut held = vec![false; n];
        for &z in heldout_zone_idxs {
            held[z] = true;
        }
        let train_end = self.config.split.train_end;
        let touches_full = |row: &crate::od::FlowRow| -> bool {
            let o = self.zones.index_of(row.origin).expect("origin known");
            let d = self.zones.index_of(row.dest).expect("dest known");
            held[o] || held[d]
        };
        // reduced full table: pre-test rows touching held-out zones removed
        let reduced_full = FlowTable::from_rows(
            self.flows_full
                .rows()
                .iter()
                .filter(|r| !(r.hour < self.config.split.val_end && touches_full(r)))
                .copied()
                .collect(),
        );
        let mass_flow_out =
            make_masses(&reduced_full, &self.zones, MassDefinition::FlowOut, train_end);
        let mass_flow_in =
            make_masses(&reduced_full, &self.zones, MassDefinition::FlowIn, train_end);
        let (mass_flow_out, mass_flow_in) = if borough_imputed {
            (
                impute_borough_means(&self.zones, &mass_flow_out, &held),
                impute_borough_means(&self.zones, &mass_flow_in, &held),
            )
        } else {
            (mass_flow_out, mass_flow_in)
        };
        let margins = MarginSet::compute(&reduced_full, &self.zones, train_end);
        let mean_outflow = margins.mean_hourly_outflow();

        let keep_fit = |&idx: &usize| !self.row_touches(idx, &held);
        let split = SplitIndices {
            train: self.split.train.iter().filter(|i| keep_fit(i)).copied().collect(),
            val: self.split.val.iter().filter(|i| keep_fit(i)).copied().collect(),
            test: self
                .split
                .test
                .iter()
                .filter(|&&i| self.row_touches(i, &held))
                .copied()
                .collect(),
        };
        if split.test.is_empty() {
            return Err(Error::EmptyHoldout);
        }
        if split.train.is_empty() || split.val.is_empty() {
            return Err(Error::EmptySplit {
                window: "holdout train/val".into(),
            });
        }
        Ok(Task {
            zones: self.zones.clone(),
            flows_full: reduced_full,
            flows: self.flows.clone(),
            pairs: self.pairs.clone(),
            impedance: self.impedance.clone(),
            split,
            config: self.config.clone(),
            mass_flow_out,
            mass_flow_in,
            mass_poi: self.mass_poi.clone(),
            margins,
            mean_outflow,
            cells: self.cells.clone(),
        })
    }
}

/// Replace held-out zones' masses with the mean over same-borough surviving
/// zones (falling back to the smoothing floor for empty boroughs).
fn impute_borough_means(zones: &ZoneTable, mass: &MassVector, held: &[bool]) -> MassVector {
    let mut imputed: Vec<(usize, f64)> = Vec::new();
    for (i, is_held) in held.iter().enumerate() {
        if !is_held {
            continue;
        }
        let borough = &zones.zone(i).borough;
        let mut sum = 0.0;
        let mut count = 0usize;
        for j in 0..zones.len() {
            if !held[j] && &zones.zone(j).borough == borough {
                sum += mass.get(j);
                count += 1;
            }
        }
        let value = if count > 0 {
            sum / count as f64
        } else {
            MASS_SMOOTHING
        };
        imputed.push((i, value));
    }
    mass.with_imputed(&imputed)
}

/// Recover the hour-of-day bucket boundaries for full-matrix evaluation.
pub fn hour_of_week_of(hour: HourStamp) -> u32 {
    hour.hour_of_week()
}
