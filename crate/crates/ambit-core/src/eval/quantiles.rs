use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::{compute_metrics, MetricCore};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantileBinReport {
    /// Q1..Qn label.
    pub bin: String,
    /// Right-closed upper edge; the last bin's edge is the max.
    pub upper_edge: f64,
    pub metrics: MetricCore,
}

/// Per-flow-quantile error diagnostics.
///
/// Bins are quantiles of the observed values (terciles by default), with
/// right-closed edges computed by linear interpolation. A degenerate flow
/// distribution collapses to a single bin flagged via `degenerate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantileDiagnostics {
    pub bins: Vec<QuantileBinReport>,
    pub degenerate: bool,
}

pub fn quantile_diagnostics(y: &[f64], y_hat: &[f64], n_bins: usize) -> Result<QuantileDiagnostics> {
    if n_bins < 2 {
        return Err(Error::InvalidConfig(format!(
            "quantile diagnostics need >= 2 bins, got {n_bins}"
        )));
    }
    if y.is_empty() || y.len() != y_hat.len() {
        return Err(Error::Empty("quantile diagnostics need aligned rows".into()));
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    if sorted[0] == sorted[sorted.len() - 1] {
        let metrics = compute_metrics(y, y_hat);
        return Ok(QuantileDiagnostics {
            bins: vec![QuantileBinReport {
                bin: "Q1".into(),
                upper_edge: sorted[0],
                metrics,
            }],
            degenerate: true,
        });
    }
    let mut edges: Vec<f64> = (1..n_bins)
        .map(|k| interpolated_quantile(&sorted, k as f64 / n_bins as f64))
        .collect();
    edges.dedup();
    let n_real = edges.len() + 1;

    let mut bucket_rows: Vec<Vec<usize>> = vec![Vec::new(); n_real];
    for (i, &yi) in y.iter().enumerate() {
        let b = edges.partition_point(|&e| e < yi);
        bucket_rows[b].push(i);
    }
    let max_y = sorted[sorted.len() - 1];
    let mut bins = Vec::new();
    for (b, rows) in bucket_rows.iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        let by: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
        let bh: Vec<f64> = rows.iter().map(|&i| y_hat[i]).collect();
        bins.push(QuantileBinReport {
            bin: format!("Q{}", bins.len() + 1),
            upper_edge: if b < edges.len() { edges[b] } else { max_y },
            metrics: compute_metrics(&by, &bh),
        });
    }
    Ok(QuantileDiagnostics {
        bins,
        degenerate: false,
    })
}

/// Type-7 (linear interpolation) quantile of pre-sorted data.
fn interpolated_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}
