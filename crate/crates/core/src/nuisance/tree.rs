//! Least-squares gradient boosting with depth-limited regression trees.
//!
//! Split search is exact and greedy: for every feature the rows of a node are
//! scanned in sorted order and each midpoint between consecutive distinct
//! values is a candidate threshold. The first candidate with the strictly
//! largest reduction in squared error wins, so ties go to the lowest feature
//! index and then the lowest threshold. Rows go left when `x <= threshold`.

use serde::{Deserialize, Serialize};

/// A binary tree stored as parallel arrays in pre-order.
///
/// Node `i` is a leaf when `feature[i] == -1`; otherwise its children are
/// `left[i]` and `right[i]`. `value[i]` is the mean target of the node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub feature: Vec<i64>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub value: Vec<f64>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = 0usize;
        loop {
            let f = self.feature[node];
            if f < 0 {
                return self.value[node];
            }
            node = if x[f as usize] <= self.threshold[node] {
                self.left[node] as usize
            } else {
                self.right[node] as usize
            };
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &RegressionTree, node: usize) -> usize {
            if t.feature[node] < 0 {
                0
            } else {
                1 + walk(t, t.left[node] as usize).max(walk(t, t.right[node] as usize))
            }
        }
        walk(self, 0)
    }

    fn push_node(&mut self, value: f64) -> usize {
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(value);
        self.feature.len() - 1
    }
}

/// Column-major copy of the training features with per-feature sort orders.
pub(crate) struct PresortedFeatures {
    columns: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
}

impl PresortedFeatures {
    pub(crate) fn new(rows: &[&[f64]]) -> Self {
        let d = rows.first().map_or(0, |r| r.len());
        let columns: Vec<Vec<f64>> = (0..d)
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        let order = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..col.len() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { columns, order }
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn best_split(
    columns: &[Vec<f64>],
    lists: &[Vec<u32>],
    targets: &[f64],
    min_leaf: usize,
) -> Option<Split> {
    let n = lists[0].len();
    let total: f64 = lists[0].iter().map(|&i| targets[i as usize]).sum();
    let parent = total * total / n as f64;
    let mut best: Option<Split> = None;
    for (f, list) in lists.iter().enumerate() {
        let col = &columns[f];
        let mut left_sum = 0.0;
        for pos in 0..n - 1 {
            let row = list[pos] as usize;
            left_sum += targets[row];
            let n_left = pos + 1;
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let (v, v_next) = (col[row], col[list[pos + 1] as usize]);
            if v == v_next {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / n_left as f64 + right_sum * right_sum / n_right as f64
                - parent;
            if gain > best.as_ref().map_or(0.0, |b| b.gain) {
                let mut threshold = 0.5 * (v + v_next);
                if threshold >= v_next || threshold < v {
                    threshold = v;
                }
                best = Some(Split {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

fn grow(
    tree: &mut RegressionTree,
    columns: &[Vec<f64>],
    lists: Vec<Vec<u32>>,
    targets: &[f64],
    depth: usize,
    max_depth: usize,
    min_leaf: usize,
) -> usize {
    let n = lists[0].len();
    let mean = lists[0].iter().map(|&i| targets[i as usize]).sum::<f64>() / n as f64;
    let node = tree.push_node(mean);
    if depth >= max_depth || n < 2 * min_leaf.max(1) {
        return node;
    }
    let Some(split) = best_split(columns, &lists, targets, min_leaf.max(1)) else {
        return node;
    };
    let goes_left = |row: u32| columns[split.feature][row as usize] <= split.threshold;
    let mut left_lists = Vec::with_capacity(lists.len());
    let mut right_lists = Vec::with_capacity(lists.len());
    for list in lists {
        let (l, r): (Vec<u32>, Vec<u32>) = list.into_iter().partition(|&row| goes_left(row));
        left_lists.push(l);
        right_lists.push(r);
    }
    tree.feature[node] = split.feature as i64;
    tree.threshold[node] = split.threshold;
    let left = grow(
        tree,
        columns,
        left_lists,
        targets,
        depth + 1,
        max_depth,
        min_leaf,
    );
    tree.left[node] = left as u32;
    let right = grow(
        tree,
        columns,
        right_lists,
        targets,
        depth + 1,
        max_depth,
        min_leaf,
    );
    tree.right[node] = right as u32;
    node
}

/// Fit one least-squares tree to `targets` over all presorted rows.
pub(crate) fn fit_tree(
    features: &PresortedFeatures,
    targets: &[f64],
    max_depth: usize,
    min_samples_leaf: usize,
) -> RegressionTree {
    let mut tree = RegressionTree {
        feature: Vec::new(),
        threshold: Vec::new(),
        left: Vec::new(),
        right: Vec::new(),
        value: Vec::new(),
    };
    if features.columns.is_empty() {
        let mean = targets.iter().sum::<f64>() / targets.len() as f64;
        tree.push_node(mean);
        return tree;
    }
    grow(
        &mut tree,
        &features.columns,
        features.order.clone(),
        targets,
        0,
        max_depth,
        min_samples_leaf,
    );
    tree
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostingParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
}

impl Default for BoostingParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 1,
        }
    }
}

/// `F(x) = base + learning_rate * sum_r tree_r(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoostedTrees {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
    /// Training mean squared error before round 1 and after every round.
    pub train_mse: Vec<f64>,
}

impl GradientBoostedTrees {
    pub fn fit(rows: &[&[f64]], targets: &[f64], params: &BoostingParams) -> Self {
        let n = targets.len();
        let base = targets.iter().sum::<f64>() / n as f64;
        let features = PresortedFeatures::new(rows);
        let mut prediction = vec![base; n];
        let mut residual: Vec<f64> = targets.iter().map(|y| y - base).collect();
        let mse = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let mut train_mse = vec![mse(&residual)];
        let mut trees = Vec::with_capacity(params.n_trees);
        for _ in 0..params.n_trees {
            let tree = fit_tree(
                &features,
                &residual,
                params.max_depth,
                params.min_samples_leaf,
            );
            for (i, row) in rows.iter().enumerate() {
                prediction[i] += params.learning_rate * tree.predict(row);
                residual[i] = targets[i] - prediction[i];
            }
            train_mse.push(mse(&residual));
            trees.push(tree);
        }
        Self {
            base,
            learning_rate: params.learning_rate,
            trees,
            train_mse,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.base + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}
