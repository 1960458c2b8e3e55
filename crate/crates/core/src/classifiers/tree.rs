//! CART decision trees on Gini impurity, and bagged random forests.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::par::Exec;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per split; `None` means `⌈√d⌉`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_features: None,
            bootstrap: true,
            tree: TreeParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        n_neg: usize,
        n_pos: usize,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        n_neg: usize,
        n_pos: usize,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn counts(&self) -> (usize, usize) {
        match self {
            Node::Leaf { n_neg, n_pos } | Node::Split { n_neg, n_pos, .. } => (*n_neg, *n_pos),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub root: Node,
}

impl TreeModel {
    fn leaf_for(&self, row: ArrayView1<f64>) -> &Node {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { .. } => return node,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    /// Positive fraction of the leaf each row lands in.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.outer_iter()
            .map(|row| {
                let (n, p) = self.leaf_for(row).counts();
                p as f64 / (n + p) as f64
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
}

impl ForestModel {
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let mut acc = Array1::zeros(x.nrows());
        for t in &self.trees {
            acc += &t.predict_proba(x);
        }
        acc / self.trees.len() as f64
    }
}

fn gini(neg: usize, pos: usize) -> f64 {
    let n = (neg + pos) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = pos as f64 / n;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [u8],
    params: &'a TreeParams,
    /// Features tried per split; `None` tries all of them.
    max_features: Option<usize>,
    rng: Option<Rng>,
}

struct Split {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Builder<'_> {
    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x.ncols();
        match (self.max_features, self.rng.as_mut()) {
            (Some(k), Some(rng)) if k < d => {
                let mut f = index::sample(rng, d, k).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    /// Lowest weighted child impurity; ties go to the lowest feature index,
    /// then the lowest threshold.
    fn best_split(&mut self, rows: &[usize]) -> Option<Split> {
        let features = self.candidate_features();
        let total_pos = rows.iter().filter(|&&r| self.y[r] == 1).count();
        let n = rows.len();
        let mut best: Option<Split> = None;
        let mut order: Vec<(f64, u8)> = Vec::with_capacity(n);
        for f in features {
            order.clear();
            order.extend(rows.iter().map(|&r| (self.x[[r, f]], self.y[r])));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            if order[0].0 == order[n - 1].0 {
                continue;
            }
            let mut left_pos = 0usize;
            for i in 0..n - 1 {
                left_pos += usize::from(order[i].1);
                if order[i].0 == order[i + 1].0 {
                    continue;
                }
                let nl = i + 1;
                let nr = n - nl;
                let right_pos = total_pos - left_pos;
                let imp = (nl as f64 * gini(nl - left_pos, left_pos)
                    + nr as f64 * gini(nr - right_pos, right_pos))
                    / n as f64;
                if best.as_ref().is_none_or(|b| imp < b.impurity) {
                    best = Some(Split {
                        feature: f,
                        threshold: 0.5 * (order[i].0 + order[i + 1].0),
                        impurity: imp,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> Node {
        let n_pos = rows.iter().filter(|&&r| self.y[r] == 1).count();
        let n_neg = rows.len() - n_pos;
        let stop = n_pos == 0
            || n_neg == 0
            || rows.len() < self.params.min_samples_split
            || self.params.max_depth.is_some_and(|m| depth >= m);
        if stop {
            return Node::Leaf { n_neg, n_pos };
        }
        let Some(split) = self.best_split(&rows) else {
            return Node::Leaf { n_neg, n_pos };
        };
        let (left, right): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&r| self.x[[r, split.feature]] <= split.threshold);
        let left = self.grow(left, depth + 1);
        let right = self.grow(right, depth + 1);
        Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            n_neg,
            n_pos,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

fn grow_tree(
    x: ArrayView2<f64>,
    y: &[u8],
    rows: Vec<usize>,
    params: &TreeParams,
    max_features: Option<usize>,
    rng: Option<Rng>,
) -> TreeModel {
    let mut b = Builder {
        x,
        y,
        params,
        max_features,
        rng,
    };
    TreeModel {
        root: b.grow(rows, 0),
    }
}

pub(super) fn fit_tree(x: ArrayView2<f64>, y: &[u8], params: &TreeParams) -> TreeModel {
    grow_tree(x, y, (0..y.len()).collect(), params, None, None)
}

pub(super) fn fit_forest(
    x: ArrayView2<f64>,
    y: &[u8],
    params: &ForestParams,
    seed: u64,
    exec: Exec,
) -> ForestModel {
    let d = x.ncols();
    let k = params
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d);
    let n = y.len();
    let trees = exec.map_range(params.n_trees, |t| {
        let mut rng = rng::rng(rng::derive(seed, t as u64));
        let rows: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        grow_tree(x, y, rows, &params.tree, Some(k), Some(rng))
    });
    ForestModel { trees }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn pure_node_is_leaf() {
        let x = array![[0.0], [1.0]];
        let t = fit_tree(x.view(), &[1, 1], &TreeParams::default());
        assert_eq!(t.root, Node::Leaf { n_neg: 0, n_pos: 2 });
    }

    #[test]
    fn tie_break_prefers_lowest_feature() {
        // Both features separate the classes perfectly.
        let x = array![[0.0, 10.0], [1.0, 11.0], [2.0, 12.0], [3.0, 13.0]];
        let t = fit_tree(x.view(), &[0, 0, 1, 1], &TreeParams::default());
        match t.root {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 1.5);
            }
            _ => panic!("expected a split"),
        }
    }

    #[test]
    fn max_depth_limits_growth() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let p = TreeParams {
            max_depth: Some(1),
            ..Default::default()
        };
        let t = fit_tree(x.view(), &[0, 1, 1, 0], &p);
        assert!(t.root.depth() <= 1);
    }

    #[test]
    fn constant_features_make_a_leaf() {
        let x = array![[1.0], [1.0], [1.0]];
        let t = fit_tree(x.view(), &[0, 1, 1], &TreeParams::default());
        assert_eq!(t.root, Node::Leaf { n_neg: 1, n_pos: 2 });
        assert_eq!(t.predict_proba(x.view())[0], 2.0 / 3.0);
    }
}
