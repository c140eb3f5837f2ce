use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::features::FeatureMatrix;
use crate::gbt::{Ensemble, Tree};

/// Per-row additive attribution in link space.
///
/// Local accuracy: `base_value + sum(contributions) == prediction` (the
/// link-space ensemble output) to within 1e-6.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributionRow {
    pub contributions: Vec<f64>,
    pub base_value: f64,
    pub prediction: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct PathElement {
    feature: usize,
    zero_fraction: f64,
    one_fraction: f64,
    pweight: f64,
}

/// Exact path-dependent TreeSHAP over `trees[..best_iteration]`, with node
/// cover (training hessian mass) as the background distribution.
pub fn shap_values(ensemble: &Ensemble, rows: &FeatureMatrix) -> Result<Vec<AttributionRow>> {
    let map = ensemble.feature_map(rows)?;
    let n_features = ensemble.feature_names.len();
    let trees = &ensemble.trees[..ensemble.best_iteration];
    let base_value: f64 =
        ensemble.base_score + trees.iter().map(|t| expected_value(t, 0)).sum::<f64>();
    let mut out = Vec::with_capacity(rows.n_rows());
    for r in 0..rows.n_rows() {
        let row: Vec<f64> = (0..n_features).map(|f| rows.get(r, map[f])).collect();
        let mut contribs = vec![0.0; n_features];
        for tree in trees {
            let mut path = Vec::with_capacity(16);
            tree_shap(tree, &row, &mut contribs, 0, 0, &mut path, 1.0, 1.0, usize::MAX);
        }
        let prediction = base_value + contribs.iter().sum::<f64>();
        out.push(AttributionRow {
            contributions: contribs,
            base_value,
            prediction,
        });
    }
    Ok(out)
}

/// Cover-weighted expectation of a (sub)tree.
pub fn expected_value(tree: &Tree, node: usize) -> f64 {
    let n = &tree.nodes[node];
    if n.is_leaf {
        return n.value;
    }
    let (l, r) = (&tree.nodes[n.left], &tree.nodes[n.right]);
    (l.cover * expected_value(tree, n.left) + r.cover * expected_value(tree, n.right)) / n.cover
}

fn extend_path(
    path: &mut Vec<PathElement>,
    zero_fraction: f64,
    one_fraction: f64,
    feature: usize,
) {
    let depth = path.len();
    path.push(PathElement {
        feature,
        zero_fraction,
        one_fraction,
        pweight: if depth == 0 { 1.0 } else { 0.0 },
    });
    for i in (0..depth).rev() {
        path[i + 1].pweight +=
            one_fraction * path[i].pweight * (i + 1) as f64 / (depth + 1) as f64;
        path[i].pweight = zero_fraction * path[i].pweight * (depth - i) as f64 / (depth + 1) as f64;
    }
}

fn unwind_path(path: &mut Vec<PathElement>, index: usize) {
    let depth = path.len() - 1;
    let one_fraction = path[index].one_fraction;
    let zero_fraction = path[index].zero_fraction;
    let mut next_one = path[depth].pweight;
    for i in (0..depth).rev() {
        if one_fraction != 0.0 {
            let tmp = path[i].pweight;
            path[i].pweight = next_one * (depth + 1) as f64 / ((i + 1) as f64 * one_fraction);
            next_one = tmp - path[i].pweight * zero_fraction * (depth - i) as f64 / (depth + 1) as f64;
        } else {
            path[i].pweight =
                path[i].pweight * (depth + 1) as f64 / (zero_fraction * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.pop();
}

fn unwound_path_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let one_fraction = path[index].one_fraction;
    let zero_fraction = path[index].zero_fraction;
    let mut next_one = path[depth].pweight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one_fraction != 0.0 {
            let tmp = next_one * (depth + 1) as f64 / ((i + 1) as f64 * one_fraction);
            total += tmp;
            next_one = path[i].pweight - tmp * zero_fraction * (depth - i) as f64 / (depth + 1) as f64;
        } else {
            total += path[i].pweight / (zero_fraction * (depth - i) as f64 / (depth + 1) as f64);
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn tree_shap(
    tree: &Tree,
    row: &[f64],
    contribs: &mut [f64],
    node: usize,
    _depth: usize,
    path: &mut Vec<PathElement>,
    parent_zero_fraction: f64,
    parent_one_fraction: f64,
    parent_feature: usize,
) {
    extend_path(path, parent_zero_fraction, parent_one_fraction, parent_feature);
    let n = &tree.nodes[node];
    if n.is_leaf {
        for i in 1..path.len() {
            let w = unwound_path_sum(path, i);
            let el = &path[i];
            contribs[el.feature] += w * (el.one_fraction - el.zero_fraction) * n.value;
        }
        return;
    }
    let hot = if row[n.feature] <= n.threshold {
        n.left
    } else {
        n.right
    };
    let cold = if hot == n.left { n.right } else { n.left };

    let mut incoming_zero = 1.0;
    let mut incoming_one = 1.0;
    if let Some(existing) = path.iter().position(|e| e.feature == n.feature) {
        incoming_zero = path[existing].zero_fraction;
        incoming_one = path[existing].one_fraction;
        unwind_path(path, existing);
    }
    let hot_zero = tree.nodes[hot].cover / n.cover * incoming_zero;
    let cold_zero = tree.nodes[cold].cover / n.cover * incoming_zero;

    let mut hot_path = path.clone();
    tree_shap(
        tree,
        row,
        contribs,
        hot,
        0,
        &mut hot_path,
        hot_zero,
        incoming_one,
        n.feature,
    );
    tree_shap(tree, row, contribs, cold, 0, path, cold_zero, 0.0, n.feature);
}

/// Brute-force Shapley values via exhaustive feature coalitions; the
/// conditional expectation marginalizes unconditioned splits by cover.
/// Exponential in features; a test oracle only.
pub fn shap_values_bruteforce(ensemble: &Ensemble, rows: &FeatureMatrix) -> Result<Vec<AttributionRow>> {
    let map = ensemble.feature_map(rows)?;
    let d = ensemble.feature_names.len();
    assert!(d <= 12, "brute force oracle is exponential in features");
    let trees = &ensemble.trees[..ensemble.best_iteration];
    let factorial = |k: usize| -> f64 { (1..=k).map(|v| v as f64).product::<f64>().max(1.0) };

    let mut out = Vec::with_capacity(rows.n_rows());
    for r in 0..rows.n_rows() {
        let row: Vec<f64> = (0..d).map(|f| rows.get(r, map[f])).collect();
        let value_of = |mask: u32| -> f64 {
            ensemble.base_score
                + trees
                    .iter()
                    .map(|t| conditional_expectation(t, 0, &row, mask))
                    .sum::<f64>()
        };
        let mut contribs = vec![0.0; d];
        for (i, contrib) in contribs.iter_mut().enumerate() {
            for mask in 0u32..(1 << d) {
                if mask & (1 << i) != 0 {
                    continue;
                }
                let s = mask.count_ones() as usize;
                let weight = factorial(s) * factorial(d - s - 1) / factorial(d);
                *contrib += weight * (value_of(mask | (1 << i)) - value_of(mask));
            }
        }
        let base_value = value_of(0);
        let prediction = base_value + contribs.iter().sum::<f64>();
        out.push(AttributionRow {
            contributions: contribs,
            base_value,
            prediction,
        });
    }
    Ok(out)
}

fn conditional_expectation(tree: &Tree, node: usize, row: &[f64], mask: u32) -> f64 {
    let n = &tree.nodes[node];
    if n.is_leaf {
        return n.value;
    }
    if mask & (1 << n.feature) != 0 {
        let next = if row[n.feature] <= n.threshold {
            n.left
        } else {
            n.right
        };
        conditional_expectation(tree, next, row, mask)
    } else {
        let (l, r) = (&tree.nodes[n.left], &tree.nodes[n.right]);
        (l.cover * conditional_expectation(tree, n.left, row, mask)
            + r.cover * conditional_expectation(tree, n.right, row, mask))
            / n.cover
    }
}
