use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::gbt::train::Ensemble;

/// One adjacent-pair violation found by the sweep.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MonotoneViolation {
    pub row: usize,
    pub grid_index: usize,
    pub value_before: f64,
    pub value_after: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub feature: String,
    pub sign: i8,
    pub rows_checked: usize,
    pub grid_points: usize,
    pub violations: Vec<MonotoneViolation>,
}

/// Sweep `feature` over `grid` for each context row, holding the other
/// features fixed, and report adjacent pairs that move against `sign`
/// beyond 1e-12. Violations are data, not errors.
pub fn enforce_monotone_check(
    ensemble: &Ensemble,
    feature: &str,
    grid: &[f64],
    context_rows: &FeatureMatrix,
    sign: i8,
) -> Result<MonotoneReport> {
    if sign != 1 && sign != -1 {
        return Err(Error::InvalidConfig(format!(
            "monotone sign must be +1 or -1, got {sign}"
        )));
    }
    if grid.len() < 2 {
        return Err(Error::InvalidConfig("sweep grid needs >= 2 points".into()));
    }
    let feat_idx = context_rows
        .index_of(feature)
        .ok_or_else(|| Error::MissingFeature(feature.to_string()))?;
    let map = ensemble.feature_map(context_rows)?;
    let mut sorted_grid = grid.to_vec();
    sorted_grid.sort_by(|a, b| a.total_cmp(b));

    let mut violations = Vec::new();
    for row in 0..context_rows.n_rows() {
        let mut prev: Option<f64> = None;
        for (gi, &g) in sorted_grid.iter().enumerate() {
            let mut f = ensemble.base_score;
            for tree in &ensemble.trees[..ensemble.best_iteration] {
                f += tree.predict_row(|feat| {
                    let col = map[feat];
                    if col == feat_idx {
                        g
                    } else {
                        context_rows.get(row, col)
                    }
                });
            }
            let value = ensemble.config.objective.transform(f);
            if let Some(p) = prev {
                let delta = value - p;
                let violated = match sign {
                    1 => delta < -1e-12,
                    _ => delta > 1e-12,
                };
                if violated {
                    violations.push(MonotoneViolation {
                        row,
                        grid_index: gi,
                        value_before: p,
                        value_after: value,
                    });
                }
            }
            prev = Some(value);
        }
    }
    Ok(MonotoneReport {
        feature: feature.to_string(),
        sign,
        rows_checked: context_rows.n_rows(),
        grid_points: sorted_grid.len(),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbt::train::{train, BoostConfig};

    fn anti_monotone_data(n: usize) -> (FeatureMatrix, Vec<f64>) {
        // target rises with distance for half the rows: anti-monotone wrt a
        // non-increasing expectation
        let distance: Vec<f64> = (0..n).map(|i| (i % 50) as f64 / 5.0).collect();
        let other: Vec<f64> = (0..n).map(|i| ((i * 13) % 7) as f64).collect();
        let y: Vec<f64> = distance
            .iter()
            .zip(&other)
            .map(|(d, o)| 2.0 * d + 0.3 * o)
            .collect();
        (
            FeatureMatrix::new(
                vec!["distance_km".into(), "other".into()],
                vec![distance, other],
            )
            .unwrap(),
            y,
        )
    }

    fn config(monotone: bool) -> BoostConfig {
        let mut cfg = BoostConfig {
            n_estimators: 30,
            max_depth: 4,
            learning_rate: 0.3,
            subsample: 1.0,
            colsample: 1.0,
            early_stopping_rounds: 0,
            min_child_weight: 1.0,
            lambda: 1.0,
            ..Default::default()
        };
        if monotone {
            cfg.monotone.insert("distance_km".into(), -1);
        }
        cfg
    }

    #[test]
    fn unconstrained_model_violates_on_increasing_data() {
        let (m, y) = anti_monotone_data(400);
        let model = train(&m, &y, &m, &y, &config(false)).unwrap();
        let grid: Vec<f64> = (0..20).map(|i| i as f64 / 2.0).collect();
        let report = enforce_monotone_check(&model, "distance_km", &grid, &m.select_rows(&[0, 1, 2, 3]), -1).unwrap();
        assert!(!report.violations.is_empty());
    }

    #[test]
    fn constrained_model_has_zero_violations() {
        let (m, y) = anti_monotone_data(400);
        let model = train(&m, &y, &m, &y, &config(true)).unwrap();
        let grid: Vec<f64> = (0..50).map(|i| i as f64 / 5.0).collect();
        let context = m.select_rows(&(0..100).collect::<Vec<_>>());
        let report =
            enforce_monotone_check(&model, "distance_km", &grid, &context, -1).unwrap();
        assert!(
            report.violations.is_empty(),
            "found {} violations",
            report.violations.len()
        );
    }

    #[test]
    fn constant_model_has_zero_violations() {
        let (m, _) = anti_monotone_data(50);
        let y = vec![3.0; 50];
        let model = train(&m, &y, &m, &y, &config(false)).unwrap();
        let grid = [0.0, 1.0, 2.0];
        let report = enforce_monotone_check(&model, "distance_km", &grid, &m, -1).unwrap();
        assert!(report.violations.is_empty());
    }
}
