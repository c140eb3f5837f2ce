use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::od::flows::{FlowTable, HourStamp};
use crate::od::zones::ZoneId;

/// The OD pairs that define a prediction task after volume filtering.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PairSet {
    pairs: BTreeSet<(ZoneId, ZoneId)>,
}

impl PairSet {
    pub fn contains(&self, origin: ZoneId, dest: ZoneId) -> bool {
        self.pairs.contains(&(origin, dest))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ZoneId, ZoneId)> + '_ {
        self.pairs.iter().copied()
    }
}

impl FromIterator<(ZoneId, ZoneId)> for PairSet {
    fn from_iter<T: IntoIterator<Item = (ZoneId, ZoneId)>>(iter: T) -> Self {
        Self {
            pairs: iter.into_iter().collect(),
        }
    }
}

/// Restrict a flow table to high-volume OD pairs.
///
/// Pair totals are computed from rows strictly before `train_end` only, so
/// the task definition cannot leak evaluation-period information. Pairs with
/// total >= `min_total` are ranked by total (descending, ties broken by
/// ascending (origin, dest)) and the top `top_k` survive. Rows of all time
/// windows restricted to the surviving pairs are returned.
pub fn filter_od_pairs(
    flows: &FlowTable,
    min_total: u64,
    top_k: usize,
    train_end: HourStamp,
) -> Result<(FlowTable, PairSet)> {
    let mut totals: HashMap<(ZoneId, ZoneId), u64> = HashMap::new();
    for row in flows.rows() {
        if row.hour < train_end {
            *totals.entry((row.origin, row.dest)).or_default() += u64::from(row.flow);
        }
    }
    let mut ranked: Vec<((ZoneId, ZoneId), u64)> = totals
        .into_iter()
        .filter(|&(_, total)| total >= min_total)
        .collect();
    if ranked.is_empty() || top_k == 0 {
        return Err(Error::EmptyTask { min_total, top_k });
    }
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(top_k);
    let pairs: PairSet = ranked.into_iter().map(|(pair, _)| pair).collect();

    let kept = flows
        .rows()
        .iter()
        .filter(|r| pairs.contains(r.origin, r.dest))
        .copied()
        .collect();
    Ok((FlowTable::from_rows(kept), pairs))
}
