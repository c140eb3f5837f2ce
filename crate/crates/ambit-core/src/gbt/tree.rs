use serde::{Deserialize, Serialize};

use crate::gbt::binning::BinMapper;

/// One node of a regression tree. Internal nodes carry the split, leaves the
/// (learning-rate-scaled) value; `cover` is the hessian sum routed through.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeNode {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    pub value: f64,
    pub cover: f64,
    pub is_leaf: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    /// Route one row (by feature accessor) to its leaf value.
    #[inline]
    pub fn predict_row(&self, feature_at: impl Fn(usize) -> f64) -> f64 {
        let mut idx = 0;
        loop {
            let node = &self.nodes[idx];
            if node.is_leaf {
                return node.value;
            }
            idx = if feature_at(node.feature) <= node.threshold {
                node.left
            } else {
                node.right
            };
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf).count()
    }
}

pub struct GrowParams<'a> {
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub lambda: f64,
    pub learning_rate: f64,
    /// Per-feature monotone sign (-1, 0, +1), indexed like the matrix.
    pub monotone: &'a [i8],
    /// Cap on |leaf value| before shrinkage; keeps log-link objectives from
    /// overshooting on extreme counts. Infinite for squared loss.
    pub value_clamp: f64,
}

struct Frontier {
    node: usize,
    rows: Vec<usize>,
    depth: usize,
    grad_sum: f64,
    hess_sum: f64,
    lower: f64,
    upper: f64,
}

#[derive(Clone, Copy, Default)]
struct BinStat {
    grad: f64,
    hess: f64,
}

/// Grow one depth-limited tree by greedy histogram split search.
///
/// Gain is evaluated with leaf values clamped to the node's monotone bounds,
/// so a split is only taken if it helps after the constraint is enforced.
/// Ties keep the lowest (feature, threshold) candidate, making growth
/// deterministic.
pub fn grow_tree(
    binned: &[Vec<u16>],
    bins: &BinMapper,
    grad: &[f64],
    hess: &[f64],
    rows: Vec<usize>,
    features: &[usize],
    params: &GrowParams<'_>,
) -> Tree {
    let mut nodes: Vec<TreeNode> = Vec::new();
    let (g0, h0) = sums(grad, hess, &rows);
    nodes.push(placeholder(h0));
    let mut queue = vec![Frontier {
        node: 0,
        rows,
        depth: 0,
        grad_sum: g0,
        hess_sum: h0,
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    }];

    while let Some(item) = queue.pop() {
        let leaf_value = clamp(
            capped(-item.grad_sum / (item.hess_sum + params.lambda), params.value_clamp),
            item.lower,
            item.upper,
        );
        let make_leaf = |nodes: &mut Vec<TreeNode>| {
            let n = &mut nodes[item.node];
            n.is_leaf = true;
            n.value = params.learning_rate * leaf_value;
            n.cover = item.hess_sum;
        };
        if item.depth >= params.max_depth || item.hess_sum < 2.0 * params.min_child_weight {
            make_leaf(&mut nodes);
            continue;
        }
        let parent_loss = split_loss(item.grad_sum, item.hess_sum, leaf_value, params.lambda);
        let mut best: Option<(f64, usize, usize, f64, f64)> = None; // gain, feat, bin, wl, wr
        for &feat in features {
            let n_bins = bins.n_bins(feat);
            if n_bins < 2 {
                continue;
            }
            let mut hist = vec![BinStat::default(); n_bins];
            let column = &binned[feat];
            for &r in &item.rows {
                let b = column[r] as usize;
                hist[b].grad += grad[r];
                hist[b].hess += hess[r];
            }
            let sign = params.monotone[feat];
            let mut gl = 0.0;
            let mut hl = 0.0;
            for b in 0..n_bins - 1 {
                gl += hist[b].grad;
                hl += hist[b].hess;
                let gr = item.grad_sum - gl;
                let hr = item.hess_sum - hl;
                if hl <= 0.0
                    || hr <= 0.0
                    || hl < params.min_child_weight
                    || hr < params.min_child_weight
                {
                    continue;
                }
                let wl = clamp(
                    capped(-gl / (hl + params.lambda), params.value_clamp),
                    item.lower,
                    item.upper,
                );
                let wr = clamp(
                    capped(-gr / (hr + params.lambda), params.value_clamp),
                    item.lower,
                    item.upper,
                );
                match sign {
                    1 if wl > wr => continue,
                    -1 if wl < wr => continue,
                    _ => {}
                }
                let child_loss = split_loss(gl, hl, wl, params.lambda)
                    + split_loss(gr, hr, wr, params.lambda);
                let gain = parent_loss - child_loss;
                if gain > 1e-12 && best.map_or(true, |(bg, ..)| gain > bg) {
                    best = Some((gain, feat, b, wl, wr));
                }
            }
        }
        let Some((_, feat, split_bin, wl, wr)) = best else {
            make_leaf(&mut nodes);
            continue;
        };
        // partition rows, preserving order
        let column = &binned[feat];
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = item
            .rows
            .iter()
            .partition(|&&r| (column[r] as usize) <= split_bin);
        let (gl, hl) = sums(grad, hess, &left_rows);
        let gr = item.grad_sum - gl;
        let hr = item.hess_sum - hl;
        // monotone bounds for descendants
        let (mut l_lower, mut l_upper) = (item.lower, item.upper);
        let (mut r_lower, mut r_upper) = (item.lower, item.upper);
        match params.monotone[feat] {
            1 => {
                let mid = 0.5 * (wl + wr);
                l_upper = l_upper.min(mid);
                r_lower = r_lower.max(mid);
            }
            -1 => {
                let mid = 0.5 * (wl + wr);
                l_lower = l_lower.max(mid);
                r_upper = r_upper.min(mid);
            }
            _ => {}
        }
        let left = nodes.len();
        nodes.push(placeholder(hl));
        let right = nodes.len();
        nodes.push(placeholder(hr));
        {
            let n = &mut nodes[item.node];
            n.is_leaf = false;
            n.feature = feat;
            n.threshold = bins.threshold(feat, split_bin);
            n.left = left;
            n.right = right;
            n.cover = item.hess_sum;
        }
        // push right first so the queue (LIFO) grows left-first, keeping
        // node numbering deterministic
        queue.push(Frontier {
            node: right,
            rows: right_rows,
            depth: item.depth + 1,
            grad_sum: gr,
            hess_sum: hr,
            lower: r_lower,
            upper: r_upper,
        });
        queue.push(Frontier {
            node: left,
            rows: left_rows,
            depth: item.depth + 1,
            grad_sum: gl,
            hess_sum: hl,
            lower: l_lower,
            upper: l_upper,
        });
    }
    Tree { nodes }
}

fn placeholder(cover: f64) -> TreeNode {
    TreeNode {
        feature: 0,
        threshold: 0.0,
        left: 0,
        right: 0,
        value: 0.0,
        cover,
        is_leaf: true,
    }
}

fn sums(grad: &[f64], hess: &[f64], rows: &[usize]) -> (f64, f64) {
    let mut g = 0.0;
    let mut h = 0.0;
    for &r in rows {
        g += grad[r];
        h += hess[r];
    }
    (g, h)
}

/// Loss contribution `G w + (H + lambda) w^2 / 2` of a node at value `w`.
#[inline]
fn split_loss(g: f64, h: f64, w: f64, lambda: f64) -> f64 {
    g * w + 0.5 * (h + lambda) * w * w
}

#[inline]
fn clamp(v: f64, lower: f64, upper: f64) -> f64 {
    v.max(lower).min(upper)
}

#[inline]
fn capped(v: f64, cap: f64) -> f64 {
    v.clamp(-cap, cap)
}
