use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::gbt::binning::{BinMapper, DEFAULT_MAX_BINS};
use crate::gbt::objective::Objective;
use crate::gbt::tree::{grow_tree, GrowParams, Tree};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoostConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub subsample: f64,
    pub colsample: f64,
    /// 0 disables early stopping (all grown trees are used).
    pub early_stopping_rounds: usize,
    pub objective: Objective,
    /// Per-feature monotone sign by feature name (-1, 0, +1).
    pub monotone: HashMap<String, i8>,
    pub seed: u64,
    pub min_child_weight: f64,
    pub lambda: f64,
    /// Cap on |leaf value| in link space for count objectives, keeping
    /// Poisson/Tweedie steps from overshooting on extreme counts.
    pub max_delta_step: f64,
    /// Override the initial link-space prediction (residual learners pin 0).
    pub base_score: Option<f64>,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            n_estimators: 500,
            max_depth: 8,
            learning_rate: 0.05,
            subsample: 0.8,
            colsample: 0.8,
            early_stopping_rounds: 50,
            objective: Objective::Squared,
            monotone: HashMap::new(),
            seed: 42,
            min_child_weight: 1.0,
            lambda: 1.0,
            max_delta_step: 0.7,
            base_score: None,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning_rate must be in (0,1], got {}", self.learning_rate));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must be in (0,1]".into());
        }
        if !(self.colsample > 0.0 && self.colsample <= 1.0) {
            return bad("colsample must be in (0,1]".into());
        }
        if self.max_depth == 0 {
            return bad("max_depth must be >= 1".into());
        }
        if self.lambda < 0.0 || self.min_child_weight < 0.0 {
            return bad("lambda and min_child_weight must be >= 0".into());
        }
        if !(self.max_delta_step > 0.0) {
            return bad("max_delta_step must be positive".into());
        }
        self.objective.validate()
    }
}

/// A trained gradient-boosted ensemble. Predictions use
/// `trees[..best_iteration]`; leaf values already include the learning rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ensemble {
    pub config: BoostConfig,
    /// Initial prediction in link space.
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub best_iteration: usize,
    pub feature_names: Vec<String>,
    pub train_history: Vec<f64>,
    pub val_history: Vec<f64>,
}

/// Train by second-order boosting with histogram split search, monotone
/// child-value bounds, and validation-based early stopping.
pub fn train(
    features: &FeatureMatrix,
    targets: &[f64],
    val_features: &FeatureMatrix,
    val_targets: &[f64],
    config: &BoostConfig,
) -> Result<Ensemble> {
    config.validate()?;
    let n = features.n_rows();
    let p = features.n_features();
    if n == 0 || targets.len() != n {
        return Err(Error::FeatureMismatch(format!(
            "{} targets for {} rows",
            targets.len(),
            n
        )));
    }
    if val_targets.len() != val_features.n_rows() {
        return Err(Error::FeatureMismatch("validation shape".into()));
    }
    if val_features.names() != features.names() {
        return Err(Error::FeatureMismatch(
            "validation features differ from training features".into(),
        ));
    }
    if p == 0 {
        return Err(Error::Empty("no usable features".into()));
    }
    if targets.iter().chain(val_targets).any(|t| !t.is_finite()) {
        return Err(Error::InvalidConfig("targets must be finite".into()));
    }
    if config.objective.needs_nonnegative_targets()
        && targets.iter().chain(val_targets).any(|t| *t < 0.0)
    {
        return Err(Error::InvalidConfig(format!(
            "{} objective needs nonnegative targets",
            config.objective.name()
        )));
    }
    let mut monotone = vec![0i8; p];
    for (name, sign) in &config.monotone {
        match features.index_of(name) {
            Some(j) => monotone[j] = sign.signum(),
            None => return Err(Error::MissingFeature(name.clone())),
        }
    }

    let objective = config.objective;
    let base_score = config
        .base_score
        .unwrap_or_else(|| objective.base_score(targets));
    let bins = BinMapper::fit(features, DEFAULT_MAX_BINS);
    let binned = bins.bin_matrix(features);

    let mut f_train = vec![base_score; n];
    let mut f_val = vec![base_score; val_features.n_rows()];
    let mean_loss = |f: &[f64], y: &[f64]| -> f64 {
        f.iter()
            .zip(y)
            .map(|(&fi, &yi)| objective.loss(fi, yi))
            .sum::<f64>()
            / y.len().max(1) as f64
    };

    let mut best_val = mean_loss(&f_val, val_targets);
    let mut best_iteration = 0usize;
    let mut rounds_since_best = 0usize;
    let mut trees: Vec<Tree> = Vec::new();
    let mut train_history = Vec::new();
    let mut val_history = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];

    let grow_params = GrowParams {
        max_depth: config.max_depth,
        min_child_weight: config.min_child_weight,
        lambda: config.lambda,
        learning_rate: config.learning_rate,
        monotone: &monotone,
        value_clamp: match config.objective {
            Objective::Squared => f64::INFINITY,
            _ => config.max_delta_step,
        },
    };

    for round in 0..config.n_estimators {
        for i in 0..n {
            let (g, h) = objective.grad_hess(f_train[i], targets[i]);
            grad[i] = g;
            hess[i] = h;
        }
        let rows = sample_indices(n, config.subsample, &mut rng);
        let cols = sample_indices(p, config.colsample, &mut rng);
        let tree = grow_tree(&binned, &bins, &grad, &hess, rows, &cols, &grow_params);
        for i in 0..n {
            f_train[i] += tree.predict_row(|feat| features.get(i, feat));
        }
        for i in 0..f_val.len() {
            f_val[i] += tree.predict_row(|feat| val_features.get(i, feat));
        }
        trees.push(tree);

        let train_loss = mean_loss(&f_train, targets);
        let val_loss = mean_loss(&f_val, val_targets);
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::BoostFailed {
                round,
                message: format!("loss train={train_loss} val={val_loss}"),
            });
        }
        train_history.push(train_loss);
        val_history.push(val_loss);
        if val_loss < best_val {
            best_val = val_loss;
            best_iteration = round + 1;
            rounds_since_best = 0;
        } else {
            rounds_since_best += 1;
            if config.early_stopping_rounds > 0
                && rounds_since_best >= config.early_stopping_rounds
            {
                break;
            }
        }
    }
    if config.early_stopping_rounds == 0 {
        best_iteration = trees.len();
    }
    Ok(Ensemble {
        config: config.clone(),
        base_score,
        trees,
        best_iteration,
        feature_names: features.names().to_vec(),
        train_history,
        val_history,
    })
}

fn sample_indices(n: usize, fraction: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let k = ((n as f64 * fraction).round() as usize).clamp(1, n);
    if k == n {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

impl Ensemble {
    /// Map this ensemble's feature names onto a prediction matrix, erroring
    /// on the first missing feature.
    pub fn feature_map(&self, features: &FeatureMatrix) -> Result<Vec<usize>> {
        self.feature_names
            .iter()
            .map(|name| {
                features
                    .index_of(name)
                    .ok_or_else(|| Error::MissingFeature(name.clone()))
            })
            .collect()
    }

    /// Link-space prediction: base score plus routed leaf values over the
    /// first `best_iteration` trees.
    pub fn predict_link(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        let map = self.feature_map(features)?;
        Ok((0..features.n_rows())
            .map(|i| self.predict_link_row(features, &map, i))
            .collect())
    }

    fn predict_link_row(&self, features: &FeatureMatrix, map: &[usize], row: usize) -> f64 {
        let mut f = self.base_score;
        for tree in &self.trees[..self.best_iteration] {
            f += tree.predict_row(|feat| features.get(row, map[feat]));
        }
        f
    }

    /// Response-scale prediction (`exp` of the link for count objectives).
    pub fn predict(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        Ok(self
            .predict_link(features)?
            .into_iter()
            .map(|f| self.config.objective.transform(f))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(columns: Vec<(&str, Vec<f64>)>) -> FeatureMatrix {
        FeatureMatrix::new(
            columns.iter().map(|(n, _)| n.to_string()).collect(),
            columns.into_iter().map(|(_, v)| v).collect(),
        )
        .unwrap()
    }

    fn quick_config(n_estimators: usize) -> BoostConfig {
        BoostConfig {
            n_estimators,
            max_depth: 3,
            learning_rate: 1.0,
            subsample: 1.0,
            colsample: 1.0,
            early_stopping_rounds: 10,
            min_child_weight: 0.0,
            lambda: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn single_stump_fits_two_points() {
        let x = matrix(vec![("x", vec![0.0, 1.0])]);
        let cfg = BoostConfig {
            max_depth: 1,
            ..quick_config(1)
        };
        let model = train(&x, &[0.0, 1.0], &x, &[0.0, 1.0], &cfg).unwrap();
        let pred = model.predict(&x).unwrap();
        assert!((pred[0] - 0.0).abs() < 1e-12);
        assert!((pred[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_targets_stop_immediately() {
        let x = matrix(vec![("x", (0..20).map(f64::from).collect())]);
        let y = vec![7.0; 20];
        let cfg = BoostConfig {
            early_stopping_rounds: 3,
            ..quick_config(50)
        };
        let model = train(&x, &y, &x, &y, &cfg).unwrap();
        assert_eq!(model.base_score, 7.0);
        assert_eq!(model.best_iteration, 0);
        assert!(model.trees.len() <= 3);
        let pred = model.predict(&x).unwrap();
        assert!(pred.iter().all(|p| (p - 7.0).abs() < 1e-12));
    }

    #[test]
    fn empty_ensemble_predicts_base_score() {
        let x = matrix(vec![("x", vec![1.0, 2.0])]);
        let model = train(&x, &[3.0, 5.0], &x, &[3.0, 5.0], &quick_config(0)).unwrap();
        assert_eq!(model.trees.len(), 0);
        let pred = model.predict(&x).unwrap();
        assert!(pred.iter().all(|p| (p - 4.0).abs() < 1e-12));
    }

    #[test]
    fn training_loss_is_monotone_without_subsampling() {
        let n = 400;
        let x1: Vec<f64> = (0..n).map(|i| ((i * 37) % 101) as f64 / 10.0).collect();
        let x2: Vec<f64> = (0..n).map(|i| ((i * 17) % 13) as f64).collect();
        let y: Vec<f64> = x1
            .iter()
            .zip(&x2)
            .map(|(a, b)| 2.0 * a + (b * 0.7).sin() * 5.0)
            .collect();
        let m = matrix(vec![("x1", x1), ("x2", x2)]);
        let cfg = BoostConfig {
            n_estimators: 40,
            learning_rate: 0.3,
            early_stopping_rounds: 0,
            min_child_weight: 1.0,
            lambda: 1.0,
            ..quick_config(40)
        };
        let model = train(&m, &y, &m, &y, &cfg).unwrap();
        for w in model.train_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "history {:?}", model.train_history);
        }
    }

    #[test]
    fn determinism_bit_for_bit() {
        let n = 300;
        let x1: Vec<f64> = (0..n).map(|i| ((i * 73) % 91) as f64 / 7.0).collect();
        let y: Vec<f64> = x1.iter().map(|a| a * a * 0.1 - a).collect();
        let m = matrix(vec![("x1", x1)]);
        let cfg = BoostConfig {
            subsample: 0.7,
            colsample: 1.0,
            n_estimators: 25,
            seed: 99,
            ..BoostConfig::default()
        };
        let a = train(&m, &y, &m, &y, &cfg).unwrap();
        let b = train(&m, &y, &m, &y, &cfg).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = train(
            &m,
            &y,
            &m,
            &y,
            &BoostConfig {
                seed: 100,
                ..cfg.clone()
            },
        )
        .unwrap();
        assert_ne!(a.to_json().unwrap(), c.to_json().unwrap());
    }

    #[test]
    fn batch_prediction_matches_per_row() {
        let n = 120;
        let x1: Vec<f64> = (0..n).map(|i| (i % 31) as f64).collect();
        let x2: Vec<f64> = (0..n).map(|i| ((i * 11) % 17) as f64).collect();
        let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a - 0.5 * b).collect();
        let m = matrix(vec![("x1", x1.clone()), ("x2", x2.clone())]);
        let model = train(&m, &y, &m, &y, &quick_config(10)).unwrap();
        let batch = model.predict(&m).unwrap();
        for i in 0..n {
            let single = matrix(vec![("x1", vec![x1[i]]), ("x2", vec![x2[i]])]);
            let one = model.predict(&single).unwrap();
            assert_eq!(one[0], batch[i], "row {i}");
        }
    }

    #[test]
    fn missing_feature_is_named() {
        let m = matrix(vec![("x1", vec![0.0, 1.0])]);
        let model = train(&m, &[0.0, 1.0], &m, &[0.0, 1.0], &quick_config(2)).unwrap();
        let other = matrix(vec![("zz", vec![0.0, 1.0])]);
        let err = model.predict(&other).unwrap_err();
        assert!(err.to_string().contains("x1"), "{err}");
    }

    #[test]
    fn poisson_objective_interpolates_counts_in_link_space() {
        let x: Vec<f64> = (0..200).map(|i| (i % 10) as f64).collect();
        let y: Vec<f64> = x.iter().map(|a| (0.2 * a).exp().round()).collect();
        let m = matrix(vec![("x", x)]);
        let cfg = BoostConfig {
            objective: Objective::Poisson,
            learning_rate: 0.5,
            n_estimators: 60,
            early_stopping_rounds: 0,
            min_child_weight: 0.0,
            lambda: 0.0,
            max_depth: 4,
            subsample: 1.0,
            colsample: 1.0,
            ..Default::default()
        };
        let model = train(&m, &y, &m, &y, &cfg).unwrap();
        let pred = model.predict(&m).unwrap();
        for (p, t) in pred.iter().zip(&y) {
            assert!((p - t).abs() < 0.05 * t.max(1.0), "pred {p} target {t}");
        }
        // negative targets rejected
        assert!(train(&m, &[-1.0; 200], &m, &y, &cfg).is_err());
    }

    #[test]
    fn serialization_round_trips() {
        let m = matrix(vec![("x", (0..50).map(f64::from).collect())]);
        let y: Vec<f64> = (0..50).map(|i| (i % 7) as f64).collect();
        let model = train(&m, &y, &m, &y, &quick_config(5)).unwrap();
        let json = model.to_json().unwrap();
        let back = Ensemble::from_json(&json).unwrap();
        assert_eq!(model.predict(&m).unwrap(), back.predict(&m).unwrap());
    }
}
