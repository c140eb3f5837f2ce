use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::od::{FlowTable, HourStamp, ZoneTable};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ZeroAugConfig {
    /// Hours to materialize full OD matrices for.
    pub sampled_hours: usize,
    /// Hard cap on retained zero rows.
    pub zero_budget: usize,
    /// Optional stricter cap: at most `ratio * positives` zeros.
    pub zero_pos_ratio_target: Option<f64>,
    pub seed: u64,
}

/// One training row of a zero-augmented sample, in zone-index space.
#[derive(Debug, Clone, Copy)]
pub struct AugRow {
    pub origin_idx: usize,
    pub dest_idx: usize,
    pub hour: HourStamp,
    pub flow: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZeroAugStats {
    pub sampled_hours: usize,
    pub rows: usize,
    pub zeros: usize,
    pub positives: usize,
    pub zero_pos_ratio: f64,
}

/// Positive training rows plus true-zero cells drawn from full OD matrices
/// of sampled training hours, downsampled to the zero budget.
pub struct ZeroAugSample {
    pub rows: Vec<AugRow>,
    pub stats: ZeroAugStats,
}

/// Build the zero-augmented training sample.
///
/// Positives are the given training rows of `task_flows`, kept in full. For
/// each sampled hour the full `universe x universe` matrix is materialized
/// and its zero cells - cells with no observed trips anywhere in
/// `full_flows` - pooled; a seeded uniform draw keeps at most
/// `min(zero_budget, ratio * positives)` of them. Retained zeros are not
/// reweighted.
pub fn build_zero_augmented_sample(
    task_flows: &FlowTable,
    train_rows: &[usize],
    full_flows: &FlowTable,
    universe: &ZoneTable,
    train_end: HourStamp,
    config: &ZeroAugConfig,
) -> Result<ZeroAugSample> {
    if universe.is_empty() {
        return Err(Error::Empty("zero augmentation over empty universe".into()));
    }
    let mut rows: Vec<AugRow> = Vec::new();
    for &idx in train_rows {
        let r = task_flows.row(idx);
        let (Some(i), Some(j)) = (universe.index_of(r.origin), universe.index_of(r.dest)) else {
            continue;
        };
        if r.flow > 0 {
            rows.push(AugRow {
                origin_idx: i,
                dest_idx: j,
                hour: r.hour,
                flow: f64::from(r.flow),
            });
        }
    }
    let positives = rows.len();

    // every observed positive cell per hour, sampled into training or not,
    // is a non-zero cell of the full matrix
    let mut observed_cells: HashMap<HourStamp, Vec<(usize, usize)>> = HashMap::new();
    for r in full_flows.rows() {
        if let (Some(i), Some(j)) = (universe.index_of(r.origin), universe.index_of(r.dest)) {
            observed_cells.entry(r.hour).or_default().push((i, j));
        }
    }

    let eligible = full_flows.distinct_hours_before(train_end);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sampled: Vec<HourStamp> = if eligible.len() <= config.sampled_hours {
        eligible
    } else {
        let mut pool = eligible;
        pool.shuffle(&mut rng);
        let mut picked: Vec<HourStamp> = pool.into_iter().take(config.sampled_hours).collect();
        picked.sort();
        picked
    };

    let n = universe.len();
    let mut zero_cells: Vec<(usize, usize, HourStamp)> = Vec::new();
    for &hour in &sampled {
        let mut occupied = vec![false; n * n];
        if let Some(cells) = observed_cells.get(&hour) {
            for &(i, j) in cells {
                occupied[i * n + j] = true;
            }
        }
        for i in 0..n {
            for j in 0..n {
                if !occupied[i * n + j] {
                    zero_cells.push((i, j, hour));
                }
            }
        }
    }

    let mut budget = config.zero_budget;
    if let Some(ratio) = config.zero_pos_ratio_target {
        budget = budget.min((ratio * positives as f64).floor() as usize);
    }
    let zeros = if zero_cells.len() > budget {
        zero_cells.shuffle(&mut rng);
        zero_cells.truncate(budget);
        zero_cells.sort();
        zero_cells
    } else {
        zero_cells
    };
    let n_zeros = zeros.len();
    for (i, j, hour) in zeros {
        rows.push(AugRow {
            origin_idx: i,
            dest_idx: j,
            hour,
            flow: 0.0,
        });
    }
    let stats = ZeroAugStats {
        sampled_hours: sampled.len(),
        rows: rows.len(),
        zeros: n_zeros,
        positives,
        zero_pos_ratio: if positives > 0 {
            n_zeros as f64 / positives as f64
        } else {
            0.0
        },
    };
    Ok(ZeroAugSample { rows, stats })
}
