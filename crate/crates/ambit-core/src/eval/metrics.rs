use serde::{Deserialize, Serialize};

/// Core error metrics for one (model, split, group) cell.
///
/// `r2` is `None` when the observed values have zero variance (the centered
/// sum of squares is zero), rather than a NaN from 0/0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    pub split: String,
    /// Optional grouping key: quantile bin, zone, borough, hour or seed.
    pub group: Option<String>,
    pub mae: f64,
    pub rmse: f64,
    pub r2: Option<f64>,
    pub smape: f64,
    pub cpc: f64,
    pub train_s: Option<f64>,
    pub pred_s: Option<f64>,
}

impl MetricReport {
    pub fn from_core(model: &str, split: &str, core: MetricCore) -> Self {
        Self {
            model: model.to_string(),
            split: split.to_string(),
            group: None,
            mae: core.mae,
            rmse: core.rmse,
            r2: core.r2,
            smape: core.smape,
            cpc: core.cpc,
            train_s: None,
            pred_s: None,
        }
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.group = Some(group.into());
        self
    }

    pub fn with_times(mut self, train_s: f64, pred_s: f64) -> Self {
        self.train_s = Some(train_s);
        self.pred_s = Some(pred_s);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricCore {
    pub mae: f64,
    pub rmse: f64,
    pub r2: Option<f64>,
    pub smape: f64,
    pub cpc: f64,
    pub n: usize,
}

/// Compute MAE, RMSE, R^2, sMAPE and CPC for one prediction vector.
///
/// Predictions are clipped to be nonnegative before any count metric is
/// computed. Per-row sMAPE is `2|y - yhat| / (|y| + |yhat|)` with the 0/0
/// case contributing 0. CPC is `2 sum(min) / (sum y + sum yhat)`; a pair of
/// all-zero vectors counts as perfect overlap.
pub fn compute_metrics(y: &[f64], y_hat: &[f64]) -> MetricCore {
    assert_eq!(y.len(), y_hat.len(), "metric inputs must align");
    assert!(!y.is_empty(), "metrics need at least one row");
    let n = y.len();
    let nf = n as f64;

    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut smape_sum = 0.0;
    let mut min_sum = 0.0;
    let mut y_sum = 0.0;
    let mut hat_sum = 0.0;
    for (&yi, &pi_raw) in y.iter().zip(y_hat) {
        let pi = pi_raw.max(0.0);
        let err = yi - pi;
        abs_sum += err.abs();
        sq_sum += err * err;
        let denom = yi.abs() + pi.abs();
        if denom > 0.0 {
            smape_sum += 2.0 * err.abs() / denom;
        }
        min_sum += yi.min(pi);
        y_sum += yi;
        hat_sum += pi;
    }
    let mean_y = y_sum / nf;
    let sst: f64 = y.iter().map(|&yi| (yi - mean_y) * (yi - mean_y)).sum();
    let r2 = if sst > 0.0 { Some(1.0 - sq_sum / sst) } else { None };
    let cpc = if y_sum + hat_sum > 0.0 {
        2.0 * min_sum / (y_sum + hat_sum)
    } else {
        1.0
    };
    MetricCore {
        mae: abs_sum / nf,
        rmse: (sq_sum / nf).sqrt(),
        r2,
        smape: smape_sum / nf,
        cpc,
        n,
    }
}

/// CPC computed per hour key, then averaged (unweighted) over hours.
pub fn cpc_hour_averaged(y: &[f64], y_hat: &[f64], hours: &[i64]) -> f64 {
    assert!(y.len() == y_hat.len() && y.len() == hours.len());
    assert!(!y.is_empty());
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by_key(|&i| hours[i]);
    let mut cpc_sum = 0.0;
    let mut n_hours = 0usize;
    let mut i = 0;
    while i < order.len() {
        let h = hours[order[i]];
        let mut min_sum = 0.0;
        let mut both_sum = 0.0;
        while i < order.len() && hours[order[i]] == h {
            let idx = order[i];
            let pi = y_hat[idx].max(0.0);
            min_sum += y[idx].min(pi);
            both_sum += y[idx] + pi;
            i += 1;
        }
        cpc_sum += if both_sum > 0.0 {
            2.0 * min_sum / both_sum
        } else {
            1.0
        };
        n_hours += 1;
    }
    cpc_sum / n_hours as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EXACT: f64 = 1e-12;

    #[test]
    fn perfect_prediction() {
        let m = compute_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        assert!(m.mae.abs() < EXACT);
        assert!(m.rmse.abs() < EXACT);
        assert!((m.r2.unwrap() - 1.0).abs() < EXACT);
        assert!(m.smape.abs() < EXACT);
        assert!((m.cpc - 1.0).abs() < EXACT);
    }

    #[test]
    fn disjoint_support_has_zero_cpc() {
        let m = compute_metrics(&[1.0, 0.0], &[0.0, 1.0]);
        assert!(m.cpc.abs() < EXACT);
    }

    #[test]
    fn worked_example() {
        let m = compute_metrics(&[2.0, 2.0], &[1.0, 3.0]);
        assert!((m.cpc - 0.75).abs() < EXACT);
        assert!((m.smape - (2.0 / 3.0 + 2.0 / 5.0) / 2.0).abs() < EXACT);
        assert!((m.mae - 1.0).abs() < EXACT);
    }

    #[test]
    fn zero_variance_reports_no_r2() {
        let m = compute_metrics(&[2.0, 2.0], &[2.0, 2.5]);
        assert!(m.r2.is_none());
    }

    #[test]
    fn smape_hits_two_when_one_side_is_zero() {
        let m = compute_metrics(&[0.0, 0.0], &[1.0, 3.0]);
        assert!((m.smape - 2.0).abs() < EXACT);
        // 0/0 rows contribute 0
        let m = compute_metrics(&[0.0, 1.0], &[0.0, 1.0]);
        assert!(m.smape.abs() < EXACT);
    }

    #[test]
    fn negative_predictions_are_clipped() {
        let m = compute_metrics(&[1.0], &[-5.0]);
        assert!((m.mae - 1.0).abs() < EXACT);
        assert!((m.smape - 2.0).abs() < EXACT);
    }

    #[test]
    fn mean_predictor_has_zero_r2() {
        let y = [1.0, 2.0, 3.0, 10.0];
        let mean = y.iter().sum::<f64>() / 4.0;
        let m = compute_metrics(&y, &[mean; 4]);
        assert!(m.r2.unwrap().abs() < EXACT);
    }

    #[test]
    fn hour_averaged_cpc_matches_examples() {
        // single hour: equals global CPC
        let y = [2.0, 2.0];
        let y_hat = [1.0, 3.0];
        let global = compute_metrics(&y, &y_hat).cpc;
        assert!((cpc_hour_averaged(&y, &y_hat, &[5, 5]) - global).abs() < EXACT);
        // two hours with CPC 1.0 and 0.5 -> 0.75
        let y = [1.0, 3.0];
        let y_hat = [1.0, 1.0];
        assert!((cpc_hour_averaged(&y, &y_hat, &[0, 1]) - 0.75).abs() < EXACT);
    }

    proptest! {
        #[test]
        fn metric_bounds_and_permutation_invariance(
            rows in proptest::collection::vec((0.0f64..50.0, -5.0f64..50.0), 1..60),
            seed in 0u64..1000,
        ) {
            let y: Vec<f64> = rows.iter().map(|r| r.0.round()).collect();
            let y_hat: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let m = compute_metrics(&y, &y_hat);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&m.cpc));
            prop_assert!((0.0..=2.0 + 1e-12).contains(&m.smape));
            prop_assert!(m.rmse + 1e-12 >= m.mae);

            // permutation invariance
            let mut order: Vec<usize> = (0..y.len()).collect();
            let mut s = seed;
            for i in (1..order.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                order.swap(i, (s >> 33) as usize % (i + 1));
            }
            let yp: Vec<f64> = order.iter().map(|&i| y[i]).collect();
            let hp: Vec<f64> = order.iter().map(|&i| y_hat[i]).collect();
            let mp = compute_metrics(&yp, &hp);
            prop_assert!((m.mae - mp.mae).abs() < 1e-9);
            prop_assert!((m.cpc - mp.cpc).abs() < 1e-9);
            prop_assert!((m.smape - mp.smape).abs() < 1e-9);
        }

        #[test]
        fn cpc_is_symmetric_and_self_perfect(
            y in proptest::collection::vec(0.0f64..20.0, 1..40),
            z in proptest::collection::vec(0.0f64..20.0, 1..40),
        ) {
            let n = y.len().min(z.len());
            let a = compute_metrics(&y[..n], &z[..n]).cpc;
            let b = compute_metrics(&z[..n], &y[..n]).cpc;
            prop_assert!((a - b).abs() < 1e-12);
            if y[..n].iter().sum::<f64>() > 0.0 {
                prop_assert!((compute_metrics(&y[..n], &y[..n]).cpc - 1.0).abs() < 1e-12);
            }
        }
    }
}
