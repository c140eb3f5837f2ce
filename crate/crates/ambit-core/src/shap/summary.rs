use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::shap::treeshap::AttributionRow;

/// Distribution statistics of one feature's contributions across rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub feature: String,
    pub mean_abs: f64,
    /// p10, p25, p50, p75, p90 of the signed contributions.
    pub quantiles: [f64; 5],
}

/// Per-feature summary, sorted by mean |contribution| descending (ties by
/// feature name for determinism).
pub fn global_summary(
    attributions: &[AttributionRow],
    feature_names: &[String],
) -> Result<Vec<FeatureSummary>> {
    if attributions.is_empty() {
        return Err(Error::Empty("no attribution rows to summarize".into()));
    }
    let n_features = feature_names.len();
    let mut out = Vec::with_capacity(n_features);
    for f in 0..n_features {
        let mut values: Vec<f64> = attributions.iter().map(|r| r.contributions[f]).collect();
        let mean_abs = values.iter().map(|v| v.abs()).sum::<f64>() / values.len() as f64;
        values.sort_by(|a, b| a.total_cmp(b));
        // nearest-rank quantiles are invariant under row duplication
        let q = |p: f64| -> f64 {
            let rank = (p * values.len() as f64).ceil() as usize;
            values[rank.clamp(1, values.len()) - 1]
        };
        out.push(FeatureSummary {
            feature: feature_names[f].clone(),
            mean_abs,
            quantiles: [q(0.10), q(0.25), q(0.50), q(0.75), q(0.90)],
        });
    }
    out.sort_by(|a, b| b.mean_abs.total_cmp(&a.mean_abs).then(a.feature.cmp(&b.feature)));
    Ok(out)
}

/// `attributions.csv`: one record per (row, feature) with the paired feature
/// value, enough to render a beeswarm.
pub fn write_attributions_csv(
    path: &Path,
    attributions: &[AttributionRow],
    features: &FeatureMatrix,
    feature_names: &[String],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["row_id", "feature", "value", "contribution"])?;
    for (row_id, row) in attributions.iter().enumerate() {
        for (f, name) in feature_names.iter().enumerate() {
            let col = features
                .index_of(name)
                .ok_or_else(|| Error::MissingFeature(name.clone()))?;
            w.write_record([
                row_id.to_string(),
                name.clone(),
                format!("{:.6}", features.get(row_id, col)),
                format!("{:.6}", row.contributions[f]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(path: &Path, summary: &[FeatureSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["feature", "mean_abs", "p10", "p25", "p50", "p75", "p90"])?;
    for s in summary {
        w.write_record([
            s.feature.clone(),
            format!("{:.6}", s.mean_abs),
            format!("{:.6}", s.quantiles[0]),
            format!("{:.6}", s.quantiles[1]),
            format!("{:.6}", s.quantiles[2]),
            format!("{:.6}", s.quantiles[3]),
            format!("{:.6}", s.quantiles[4]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaterfallSelector {
    MaxAbsError,
    MaxFlow,
    MaxDistance,
}

impl WaterfallSelector {
    pub fn name(&self) -> &'static str {
        match self {
            WaterfallSelector::MaxAbsError => "max_abs_error",
            WaterfallSelector::MaxFlow => "max_flow",
            WaterfallSelector::MaxDistance => "max_distance",
        }
    }
}

/// One example-level explanation: ordered contributions from base to final.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaterfallRecord {
    pub selector: String,
    pub row_id: usize,
    pub base_value: f64,
    /// (feature, feature value, contribution), by |contribution| descending.
    pub contributions: Vec<(String, f64, f64)>,
    pub prediction: f64,
}

/// Pick representative rows (largest absolute error, largest observed flow,
/// longest distance; ties by row index) and emit their waterfalls.
pub fn waterfall_examples(
    attributions: &[AttributionRow],
    features: &FeatureMatrix,
    feature_names: &[String],
    observed: &[f64],
    predicted: &[f64],
    distance: &[f64],
) -> Result<Vec<WaterfallRecord>> {
    if attributions.is_empty() {
        return Err(Error::Empty("no rows to select waterfalls from".into()));
    }
    let argmax = |key: &dyn Fn(usize) -> f64| -> usize {
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for i in 0..attributions.len() {
            let v = key(i);
            if v > best_v {
                best_v = v;
                best = i;
            }
        }
        best
    };
    let selectors: [(WaterfallSelector, usize); 3] = [
        (
            WaterfallSelector::MaxAbsError,
            argmax(&|i| (observed[i] - predicted[i]).abs()),
        ),
        (WaterfallSelector::MaxFlow, argmax(&|i| observed[i])),
        (WaterfallSelector::MaxDistance, argmax(&|i| distance[i])),
    ];
    let mut out = Vec::with_capacity(3);
    for (selector, row_id) in selectors {
        let row = &attributions[row_id];
        let mut contribs: Vec<(String, f64, f64)> = feature_names
            .iter()
            .enumerate()
            .map(|(f, name)| {
                let col = features.index_of(name).expect("feature present");
                (name.clone(), features.get(row_id, col), row.contributions[f])
            })
            .collect();
        contribs.sort_by(|a, b| b.2.abs().total_cmp(&a.2.abs()).then(a.0.cmp(&b.0)));
        out.push(WaterfallRecord {
            selector: selector.name().to_string(),
            row_id,
            base_value: row.base_value,
            contributions: contribs,
            prediction: row.prediction,
        });
    }
    Ok(out)
}
