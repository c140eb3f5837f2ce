use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::od::flows::{FlowTable, HourStamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    Random,
    /// Allocate the sample proportionally across deciles of log1p(flow).
    StratifiedByFlow,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_end: HourStamp,
    pub val_end: HourStamp,
    pub test_end: HourStamp,
    pub sampling: SamplingMode,
    pub max_train_rows: usize,
    pub max_eval_rows: usize,
    pub seed: u64,
}

impl SplitSpec {
    fn validate(&self) -> Result<()> {
        if !(self.train_end < self.val_end && self.val_end < self.test_end) {
            return Err(Error::InvalidConfig(format!(
                "split boundaries must be ordered: {} < {} < {}",
                self.train_end, self.val_end, self.test_end
            )));
        }
        Ok(())
    }
}

/// Row indices (into the task flow table) for each split, ascending.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Partition rows into time windows and down-sample each window without
/// replacement. Identical specs give identical index sets.
pub fn split_and_sample(flows: &FlowTable, spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;
    let mut windows: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (idx, row) in flows.rows().iter().enumerate() {
        let h = row.hour;
        if h < spec.train_end {
            windows[0].push(idx);
        } else if h < spec.val_end {
            windows[1].push(idx);
        } else if h < spec.test_end {
            windows[2].push(idx);
        }
    }
    let names = ["train", "val", "test"];
    let caps = [spec.max_train_rows, spec.max_eval_rows, spec.max_eval_rows];
    let mut out: Vec<Vec<usize>> = Vec::with_capacity(3);
    for (w, window) in windows.into_iter().enumerate() {
        if window.is_empty() {
            return Err(Error::EmptySplit {
                window: names[w].to_string(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(w as u64));
        let mut picked = if window.len() <= caps[w] {
            window
        } else {
            match spec.sampling {
                SamplingMode::Random => sample_without_replacement(&window, caps[w], &mut rng),
                SamplingMode::StratifiedByFlow => {
                    stratified_sample(flows, &window, caps[w], &mut rng)
                }
            }
        };
        picked.sort_unstable();
        out.push(picked);
    }
    let mut it = out.into_iter();
    Ok(SplitIndices {
        train: it.next().unwrap(),
        val: it.next().unwrap(),
        test: it.next().unwrap(),
    })
}

fn sample_without_replacement(pool: &[usize], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut shuffled = pool.to_vec();
    shuffled.shuffle(rng);
    shuffled.truncate(k);
    shuffled
}

/// Deciles of log1p(flow) within the window; per-bin targets by largest
/// remainder, so realized counts are within one row of proportionality.
fn stratified_sample(
    flows: &FlowTable,
    window: &[usize],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let mut keyed: Vec<f64> = window
        .iter()
        .map(|&i| f64::from(flows.row(i).flow).ln_1p())
        .collect();
    let mut sorted = keyed.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    let mut edges: Vec<f64> = (1..10)
        .map(|q| sorted[(q * n / 10).min(n - 1)])
        .collect();
    edges.dedup();

    let n_bins = edges.len() + 1;
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); n_bins];
    for (pos, &row_idx) in window.iter().enumerate() {
        let key = keyed[pos];
        let bin = edges.partition_point(|&e| e < key);
        bins[bin].push(row_idx);
    }
    keyed.clear();

    // largest-remainder allocation of k across bins
    let total = window.len() as f64;
    let shares: Vec<f64> = bins.iter().map(|b| k as f64 * b.len() as f64 / total).collect();
    let mut alloc: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let mut assigned: usize = alloc.iter().sum();
    let mut order: Vec<usize> = (0..n_bins).collect();
    order.sort_by(|&a, &b| {
        let ra = shares[a] - shares[a].floor();
        let rb = shares[b] - shares[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &b in order.iter().cycle() {
        if assigned >= k {
            break;
        }
        if alloc[b] < bins[b].len() {
            alloc[b] += 1;
            assigned += 1;
        }
    }

    let mut picked = Vec::with_capacity(k);
    for (b, bin) in bins.iter().enumerate() {
        picked.extend(sample_without_replacement(bin, alloc[b].min(bin.len()), rng));
    }
    picked
}
