use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shap::treeshap::AttributionRow;

/// Stability of the mean-|contribution| feature ranking between an early and
/// a late window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankStabilityReport {
    pub n_early: usize,
    pub n_late: usize,
    /// Spearman rank correlation with average ranks on ties, in [-1, 1].
    pub spearman: f64,
    /// Single-feature case: correlation pinned to 1.0 by convention.
    pub degenerate: bool,
}

pub fn rank_stability(
    early: &[AttributionRow],
    late: &[AttributionRow],
    n_features: usize,
) -> Result<RankStabilityReport> {
    if early.is_empty() || late.is_empty() {
        return Err(Error::Empty("rank stability needs both windows".into()));
    }
    if n_features == 0 {
        return Err(Error::Empty("no features to rank".into()));
    }
    if early[0].contributions.len() != n_features || late[0].contributions.len() != n_features {
        return Err(Error::FeatureMismatch("windows disagree on features".into()));
    }
    if n_features == 1 {
        return Ok(RankStabilityReport {
            n_early: early.len(),
            n_late: late.len(),
            spearman: 1.0,
            degenerate: true,
        });
    }
    let mean_abs = |rows: &[AttributionRow]| -> Vec<f64> {
        (0..n_features)
            .map(|f| rows.iter().map(|r| r.contributions[f].abs()).sum::<f64>() / rows.len() as f64)
            .collect()
    };
    let spearman = spearman_rho(&mean_abs(early), &mean_abs(late));
    Ok(RankStabilityReport {
        n_early: early.len(),
        n_late: late.len(),
        spearman,
        degenerate: false,
    })
}

/// Average ranks (1-based) with ties sharing the mean rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation = Pearson correlation of average ranks.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = ra.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for i in 0..ra.len() {
        let xa = ra[i] - mean;
        let xb = rb[i] - mean;
        num += xa * xb;
        da += xa * xa;
        db += xb * xb;
    }
    if da == 0.0 || db == 0.0 {
        return 1.0;
    }
    (num / (da * db).sqrt()).clamp(-1.0, 1.0)
}
