//! Gray-box residual composition: log-space residual targets over a physical
//! baseline, boosted correction, and non-negative reconstruction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::gbt::{train, BoostConfig, Ensemble, Objective};

/// Residual anchors: which physical baseline the correction rides on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorKind {
    GravityFlow,
    GravityPoi,
    Ppml,
    PpmlAll,
    /// 24 independent gravity fits by hour of day.
    GravityTimeSegmented,
    GravityDc,
}

impl AnchorKind {
    pub const ALL: [AnchorKind; 6] = [
        AnchorKind::GravityFlow,
        AnchorKind::GravityPoi,
        AnchorKind::Ppml,
        AnchorKind::PpmlAll,
        AnchorKind::GravityTimeSegmented,
        AnchorKind::GravityDc,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            AnchorKind::GravityFlow => "Gravity flow",
            AnchorKind::GravityPoi => "Gravity POI",
            AnchorKind::Ppml => "PPML",
            AnchorKind::PpmlAll => "PPML all",
            AnchorKind::GravityTimeSegmented => "Gravity time",
            AnchorKind::GravityDc => "Gravity DC",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AnchorSpec {
    pub anchor: AnchorKind,
    /// Append log1p of the baseline prediction to the feature set.
    pub include_base_feature: bool,
}

/// Log-space residual target.
#[inline]
pub fn residual_target(observed: f64, baseline: f64) -> f64 {
    observed.ln_1p() - baseline.ln_1p()
}

/// Invert the residual transform, clipping to nonnegative flows. A zero
/// correction returns the baseline bit-for-bit.
#[inline]
pub fn reconstruct(baseline: f64, r_hat: f64) -> f64 {
    if r_hat == 0.0 {
        return baseline.max(0.0);
    }
    ((baseline.ln_1p() + r_hat).exp() - 1.0).max(0.0)
}

/// Aligned rows for residual learning: observed flow, baseline prediction,
/// residual target, and the feature matrix (with the baseline column already
/// appended when configured).
#[derive(Debug, Clone)]
pub struct ResidualFrame {
    pub observed: Vec<f64>,
    pub baseline: Vec<f64>,
    pub target: Vec<f64>,
    pub features: FeatureMatrix,
}

pub fn build_residual_frame(
    observed: Vec<f64>,
    baseline: Vec<f64>,
    features: FeatureMatrix,
) -> Result<ResidualFrame> {
    if observed.len() != baseline.len() || observed.len() != features.n_rows() {
        return Err(Error::FeatureMismatch("residual frame alignment".into()));
    }
    for (row, &b) in baseline.iter().enumerate() {
        if !b.is_finite() || b < 0.0 {
            return Err(Error::BadBaseline { row, value: b });
        }
    }
    let target = observed
        .iter()
        .zip(&baseline)
        .map(|(&t, &b)| residual_target(t, b))
        .collect();
    Ok(ResidualFrame {
        observed,
        baseline,
        target,
        features,
    })
}

/// Train the boosted residual learner. The objective is squared loss on the
/// residual target with the initial prediction pinned to zero, so an empty
/// ensemble composes to exactly the baseline.
pub fn train_residual(
    train_frame: &ResidualFrame,
    val_frame: &ResidualFrame,
    config: &BoostConfig,
) -> Result<Ensemble> {
    let cfg = BoostConfig {
        objective: Objective::Squared,
        base_score: Some(0.0),
        ..config.clone()
    };
    train(
        &train_frame.features,
        &train_frame.target,
        &val_frame.features,
        &val_frame.target,
        &cfg,
    )
}

/// Composed prediction: reconstruct the baseline with the learned residual.
pub fn compose_predict(
    ensemble: &Ensemble,
    baseline: &[f64],
    features: &FeatureMatrix,
) -> Result<Vec<f64>> {
    let r_hat = ensemble.predict_link(features)?;
    Ok(baseline
        .iter()
        .zip(&r_hat)
        .map(|(&b, &r)| reconstruct(b, r))
        .collect())
}
