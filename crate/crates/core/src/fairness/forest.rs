use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::numcore::{rng, Matrix};

use super::{FairnessError, Model, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        /// Training rows of each class that reached this leaf.
        counts: Vec<usize>,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub n_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Features tried per split; `None` means ⌈√d⌉.
    pub feature_subsample: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 8,
            feature_subsample: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub n_classes: usize,
    pub n_features: usize,
    pub params: ForestParams,
    pub seed: u64,
}

pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestSplit {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Highest Gini gain over the candidate features; thresholds sit midway
/// between consecutive distinct values. Ties keep the earlier candidate.
pub fn best_split(x: &Matrix, y: &[usize], rows: &[usize], features: &[usize], n_classes: usize) -> Option<BestSplit> {
    let mut parent = vec![0usize; n_classes];
    for &r in rows {
        parent[y[r]] += 1;
    }
    let n = rows.len() as f64;
    let parent_gini = gini(&parent);
    let mut best: Option<BestSplit> = None;
    let mut sorted = rows.to_vec();
    for &f in features {
        sorted.sort_by(|&a, &b| x[(a, f)].total_cmp(&x[(b, f)]).then(a.cmp(&b)));
        let mut left = vec![0usize; n_classes];
        let mut right = parent.clone();
        for i in 0..sorted.len() - 1 {
            let c = y[sorted[i]];
            left[c] += 1;
            right[c] -= 1;
            let (lo, hi) = (x[(sorted[i], f)], x[(sorted[i + 1], f)]);
            if lo == hi {
                continue;
            }
            let nl = (i + 1) as f64;
            let gain = parent_gini - (nl / n) * gini(&left) - ((n - nl) / n) * gini(&right);
            if best.is_none_or(|b| gain > b.gain) {
                best = Some(BestSplit {
                    feature: f,
                    threshold: lo + (hi - lo) / 2.0,
                    gain,
                });
            }
        }
    }
    best.filter(|b| b.gain > 1e-12)
}

struct Grower<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    n_classes: usize,
    max_depth: usize,
    mtry: usize,
    rng: rng::Rng,
    nodes: Vec<TreeNode>,
}

impl Grower<'_> {
    fn grow(&mut self, rows: &[usize], depth: usize) -> usize {
        let mut counts = vec![0usize; self.n_classes];
        for &r in rows {
            counts[self.y[r]] += 1;
        }
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { counts: counts.clone() });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if depth >= self.max_depth || pure || rows.len() < 2 {
            return id;
        }
        let d = self.x.cols();
        let features: Vec<usize> = if self.mtry >= d {
            (0..d).collect()
        } else {
            let mut f = sample(&mut self.rng, d, self.mtry).into_vec();
            f.sort_unstable();
            f
        };
        let Some(split) = best_split(self.x, self.y, rows, &features, self.n_classes) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.x[(i, split.feature)] <= split.threshold);
        let left = self.grow(&l, depth + 1);
        let right = self.grow(&r, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

fn check_labels(x: &Matrix, y: &[usize]) -> Result<usize> {
    if x.rows() != y.len() || y.is_empty() {
        return Err(FairnessError::InvalidArgument(format!("{} rows, {} labels", x.rows(), y.len())));
    }
    let n_classes = y.iter().max().map_or(0, |m| m + 1);
    let distinct = y.iter().collect::<std::collections::BTreeSet<_>>().len();
    if distinct < 2 {
        return Err(FairnessError::InvalidArgument("labels hold a single class".into()));
    }
    Ok(n_classes.max(2))
}

impl DecisionTree {
    /// CART on all rows with every feature considered at each split.
    pub fn fit(x: &Matrix, y: &[usize], max_depth: usize) -> Result<Self> {
        let n_classes = check_labels(x, y)?;
        let rows: Vec<usize> = (0..x.rows()).collect();
        Ok(grow_tree(x, y, &rows, n_classes, max_depth, x.cols(), 0))
    }

    fn leaf(&self, row: &[f64]) -> &[usize] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { counts } => return counts,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let counts = self.leaf(row);
        let n: usize = counts.iter().sum();
        counts.iter().map(|&c| c as f64 / n as f64).collect()
    }

    /// Root split feature, if the root is not a leaf.
    pub fn root_feature(&self) -> Option<usize> {
        match self.nodes.first()? {
            TreeNode::Split { feature, .. } => Some(*feature),
            TreeNode::Leaf { .. } => None,
        }
    }

    pub fn used_features(&self) -> std::collections::BTreeSet<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Split { feature, .. } => Some(*feature),
                TreeNode::Leaf { .. } => None,
            })
            .collect()
    }
}

fn grow_tree(x: &Matrix, y: &[usize], rows: &[usize], n_classes: usize, max_depth: usize, mtry: usize, seed: u64) -> DecisionTree {
    let mut g = Grower {
        x,
        y,
        n_classes,
        max_depth,
        mtry,
        rng: rng::seeded(seed),
        nodes: Vec::new(),
    };
    g.grow(rows, 0);
    DecisionTree {
        nodes: g.nodes,
        n_classes,
    }
}

/// Random forest: per tree a bootstrap sample and a seed derived from the
/// master seed; each split tries a random feature subset.
pub fn train_forest(x: &Matrix, y: &[usize], params: &ForestParams, seed: u64) -> Result<ForestModel> {
    let n_classes = check_labels(x, y)?;
    if params.n_trees == 0 {
        return Err(FairnessError::InvalidArgument("forest needs at least one tree".into()));
    }
    let d = x.cols();
    let mtry = params
        .feature_subsample
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d.max(1));
    let n = x.rows();
    let trees = (0..params.n_trees)
        .map(|t| {
            let tree_seed = rng::substream(seed, &format!("tree{t}"));
            let mut r = rng::seeded(tree_seed);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| r.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_tree(x, y, &rows, n_classes, params.max_depth, mtry, r.random())
        })
        .collect();
    Ok(ForestModel {
        trees,
        n_classes,
        n_features: d,
        params: params.clone(),
        seed,
    })
}

impl ForestModel {
    /// Mean of the trees' leaf class distributions.
    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (a, b) in p.iter_mut().zip(t.predict_proba(row)) {
                *a += b;
            }
        }
        p.iter_mut().for_each(|v| *v /= self.trees.len() as f64);
        p
    }

    /// Most probable class, ties to the lower class.
    pub fn predict(&self, row: &[f64]) -> usize {
        let p = self.predict_proba(row);
        let mut best = 0;
        for (c, &v) in p.iter().enumerate() {
            if v > p[best] {
                best = c;
            }
        }
        best
    }

    pub fn predict_all(&self, x: &Matrix) -> Vec<usize> {
        x.row_iter().map(|r| self.predict(r)).collect()
    }

    pub fn used_features(&self) -> std::collections::BTreeSet<usize> {
        self.trees.iter().flat_map(|t| t.used_features()).collect()
    }
}

impl Model for ForestModel {
    fn output(&self, x: &[f64]) -> f64 {
        self.predict_proba(x)[1]
    }

    fn classify(&self, x: &[f64]) -> usize {
        self.predict(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[5, 5]), 0.5);
        assert_eq!(gini(&[4, 0]), 0.0);
    }

    #[test]
    fn hand_computed_root_split() {
        // feature 1 separates perfectly; feature 0 splits 3/1 vs 1/3
        let x = Matrix::from_rows(&[
            [0.0, 0.0, 1.0],
            [0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 1.0],
            [1.0, 1.0, 0.0],
            [1.0, 1.0, 1.0],
            [0.0, 1.0, 0.0],
        ])
        .unwrap();
        let y = [0, 0, 0, 0, 1, 1, 1, 1];
        let rows: Vec<usize> = (0..8).collect();
        let best = best_split(&x, &y, &rows, &[0, 1, 2], 2).unwrap();
        // parent gini 0.5; feature 1 leaves pure children: gain 0.5
        // feature 0: children (3,1) and (1,3), gini 0.375 each: gain 0.125
        assert_eq!(best.feature, 1);
        assert!((best.gain - 0.5).abs() < 1e-12);
        assert_eq!(best.threshold, 0.5);
        let tree = DecisionTree::fit(&x, &y, 3).unwrap();
        assert_eq!(tree.root_feature(), Some(1));
    }

    #[test]
    fn separable_data_fit_exactly() {
        let mut r = rng::seeded(8);
        let rows: Vec<[f64; 2]> = (0..100).map(|_| [r.random::<f64>(), r.random::<f64>()]).collect();
        let y: Vec<usize> = rows.iter().map(|p| usize::from(p[0] + p[1] > 1.0)).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let params = ForestParams {
            n_trees: 25,
            max_depth: 20,
            ..ForestParams::default()
        };
        let f = train_forest(&x, &y, &params, 3).unwrap();
        assert_eq!(f.predict_all(&x), y);
        assert_eq!(f, train_forest(&x, &y, &params, 3).unwrap());
        assert!(train_forest(&x, &vec![1; 100], &params, 3).is_err());
    }

    #[test]
    fn leaf_counts_match_training_rows() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let f = train_forest(&x, &[0, 0, 1, 1], &ForestParams::default(), 1).unwrap();
        for t in &f.trees {
            let total: usize = t
                .nodes
                .iter()
                .filter_map(|n| match n {
                    TreeNode::Leaf { counts } => Some(counts.iter().sum::<usize>()),
                    _ => None,
                })
                .sum::<usize>();
            // split nodes drop their counts, so the leaves partition the bootstrap sample
            assert_eq!(total, 4);
        }
    }
}
