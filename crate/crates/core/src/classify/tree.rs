//! C4.5-style decision tree: binary splits on numeric features chosen by
//! gain ratio over midpoint candidates, grown until purity, depth, or
//! feasibility stops, then pessimistically pruned bottom-up with the C4.5
//! confidence-bound error estimate.
//!
//! Candidates are scanned in (dimension, threshold) order and ties keep
//! the first maximum, so training is deterministic. Zero-gain candidates
//! stay eligible: parity-style data (XOR) has no positive-gain root split
//! yet still needs one before deeper splits can separate it.

use serde::{Deserialize, Serialize};

use super::{ClassifierModel, ClassifyError, Prediction};
use crate::features::ClassLabel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Minimum samples each branch of a split must keep.
    pub min_leaf: usize,
    pub max_depth: usize,
    /// Pruning confidence; `None` disables pruning.
    pub confidence: Option<f64>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            min_leaf: 2,
            max_depth: 64,
            confidence: Some(0.25),
        }
    }
}

/// Class counts are `[malicious, benign]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        counts: [usize; 2],
    },
    Split {
        dim: usize,
        threshold: f64,
        counts: [usize; 2],
        /// Child index for `x[dim] <= threshold`.
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    /// Root at index 0; acyclic by construction.
    pub nodes: Vec<TreeNode>,
    pub dim_in: usize,
    pub params: TreeParams,
}

/// Grow and prune a tree.
pub fn train_decision_tree(
    x: &[Vec<f64>],
    y: &[ClassLabel],
    params: TreeParams,
) -> Result<ClassifierModel, ClassifyError> {
    if x.len() != y.len() {
        return Err(ClassifyError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(ClassifyError::EmptyInput);
    }
    let dim = x[0].len();
    let indices: Vec<usize> = (0..x.len()).collect();
    let mut root = grow(x, y, &indices, 0, &params);
    if let Some(cf) = params.confidence {
        prune(&mut root, cf);
    }
    let mut nodes = Vec::new();
    flatten(&root, &mut nodes);
    Ok(ClassifierModel::DecisionTree(DecisionTreeModel {
        nodes,
        dim_in: dim,
        params,
    }))
}

enum Grown {
    Leaf {
        counts: [usize; 2],
    },
    Split {
        dim: usize,
        threshold: f64,
        counts: [usize; 2],
        left: Box<Grown>,
        right: Box<Grown>,
    },
}

fn count_labels(y: &[ClassLabel], indices: &[usize]) -> [usize; 2] {
    let mut counts = [0usize; 2];
    for &i in indices {
        match y[i] {
            ClassLabel::Malicious => counts[0] += 1,
            ClassLabel::Benign => counts[1] += 1,
        }
    }
    counts
}

fn entropy_of(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    let mut h = 0.0;
    for c in counts {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.log2();
        }
    }
    h
}

/// Best (dim, threshold) by gain ratio over midpoints between consecutive
/// distinct sorted values, honoring `min_leaf` on both branches. Ties keep
/// the first candidate in (dim, threshold) scan order.
#[allow(clippy::needless_range_loop)] // d indexes per-sample rows, not one slice
pub(crate) fn best_split(
    x: &[Vec<f64>],
    y: &[ClassLabel],
    indices: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64, f64)> {
    let dim = x[indices[0]].len();
    let n = indices.len();
    let parent = entropy_of(count_labels(y, indices));
    let mut best: Option<(usize, f64, f64)> = None;

    for d in 0..dim {
        let mut column: Vec<(f64, ClassLabel)> = indices.iter().map(|&i| (x[i][d], y[i])).collect();
        column.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));

        let mut left = [0usize; 2];
        let mut right = count_labels(y, indices);
        for i in 0..n - 1 {
            let (value, label) = column[i];
            let slot = if label == ClassLabel::Malicious { 0 } else { 1 };
            left[slot] += 1;
            right[slot] -= 1;
            if column[i + 1].0 <= value {
                continue; // not a boundary between distinct values
            }
            let n_left = i + 1;
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let threshold = value + (column[i + 1].0 - value) / 2.0;
            let p_left = n_left as f64 / n as f64;
            let p_right = n_right as f64 / n as f64;
            let gain = parent - p_left * entropy_of(left) - p_right * entropy_of(right);
            let split_info = -p_left * p_left.log2() - p_right * p_right.log2();
            let ratio = gain / split_info;
            if best.is_none_or(|(_, _, best_ratio)| ratio > best_ratio) {
                best = Some((d, threshold, ratio));
            }
        }
    }
    best
}

fn grow(
    x: &[Vec<f64>],
    y: &[ClassLabel],
    indices: &[usize],
    depth: usize,
    params: &TreeParams,
) -> Grown {
    let counts = count_labels(y, indices);
    if counts[0] == 0 || counts[1] == 0 || depth >= params.max_depth {
        return Grown::Leaf { counts };
    }
    let Some((dim, threshold, _)) = best_split(x, y, indices, params.min_leaf) else {
        return Grown::Leaf { counts };
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
        indices.iter().partition(|&&i| x[i][dim] <= threshold);
    Grown::Split {
        dim,
        threshold,
        counts,
        left: Box::new(grow(x, y, &left_idx, depth + 1, params)),
        right: Box::new(grow(x, y, &right_idx, depth + 1, params)),
    }
}

/// Pessimistic error estimate of a subtree: sum over its leaves of
/// `errors + added_errors`.
fn subtree_estimated_errors(node: &Grown, cf: f64) -> f64 {
    match node {
        Grown::Leaf { counts } => {
            let n = (counts[0] + counts[1]) as f64;
            let e = (counts[0] + counts[1] - counts[0].max(counts[1])) as f64;
            e + added_errors(n, e, cf)
        }
        Grown::Split { left, right, .. } => {
            subtree_estimated_errors(left, cf) + subtree_estimated_errors(right, cf)
        }
    }
}

fn prune(node: &mut Grown, cf: f64) {
    let counts = match node {
        Grown::Leaf { .. } => return,
        Grown::Split {
            left,
            right,
            counts,
            ..
        } => {
            prune(left, cf);
            prune(right, cf);
            *counts
        }
    };
    let n = (counts[0] + counts[1]) as f64;
    let e = (counts[0] + counts[1] - counts[0].max(counts[1])) as f64;
    let as_leaf = e + added_errors(n, e, cf);
    if as_leaf <= subtree_estimated_errors(node, cf) + 1e-9 {
        *node = Grown::Leaf { counts };
    }
}

fn flatten(node: &Grown, nodes: &mut Vec<TreeNode>) -> usize {
    match node {
        Grown::Leaf { counts } => {
            nodes.push(TreeNode::Leaf { counts: *counts });
            nodes.len() - 1
        }
        Grown::Split {
            dim,
            threshold,
            counts,
            left,
            right,
        } => {
            let index = nodes.len();
            nodes.push(TreeNode::Leaf { counts: *counts }); // placeholder
            let left_index = flatten(left, nodes);
            let right_index = flatten(right, nodes);
            nodes[index] = TreeNode::Split {
                dim: *dim,
                threshold: *threshold,
                counts: *counts,
                left: left_index,
                right: right_index,
            };
            index
        }
    }
}

/// C4.5 added-error count for a leaf with `n` cases and `e` errors at
/// confidence `cf`: the upper confidence bound of the binomial error rate,
/// with the low-end and high-end special cases of the original.
pub(crate) fn added_errors(n: f64, e: f64, cf: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    if e < 1.0 {
        let base = n * (1.0 - cf.powf(1.0 / n));
        if e == 0.0 {
            return base;
        }
        return base + e * (added_errors(n, 1.0, cf) - base);
    }
    if e + 0.5 >= n {
        return (n - e).max(0.0);
    }
    let z = normal_inverse(1.0 - cf);
    let f = (e + 0.5) / n;
    let r = (f + z * z / (2.0 * n) + z * (f / n - f * f / n + z * z / (4.0 * n * n)).sqrt())
        / (1.0 + z * z / n);
    r * n - e
}

/// Inverse standard normal CDF (Acklam's rational approximation,
/// |relative error| < 1.15e-9 over (0, 1)).
fn normal_inverse(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    assert!(p > 0.0 && p < 1.0, "probability outside (0, 1)");
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

impl DecisionTreeModel {
    pub(super) fn predict(&self, x: &[f64]) -> Prediction {
        let mut index = 0usize;
        loop {
            match &self.nodes[index] {
                TreeNode::Leaf { counts } => {
                    let n = counts[0] + counts[1];
                    let score = if n == 0 {
                        0.0
                    } else {
                        counts[0] as f64 / n as f64
                    };
                    return Prediction {
                        label: if score > 0.5 {
                            ClassLabel::Malicious
                        } else {
                            ClassLabel::Benign
                        },
                        score,
                    };
                }
                TreeNode::Split {
                    dim,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    index = if x[*dim] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Maximum number of splits on any root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], index: usize) -> usize {
            match &nodes[index] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}
