//! Missing-link prediction between persons: a two-layer GCN and a
//! position-aware GNN built on anchor-set distances, both scoring a pair by
//! the inner product of node embeddings and trained with logistic loss on
//! sampled negatives.

mod model;

pub use model::{
    anchor_features, anchor_sets, bfs, normalized_adjacency, score_pairs, sigmoid, train_link_model, Hyperparams,
    LinkModel, ModelKind,
};

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EdgeProvenance, PropertyGraph};
use crate::numcore::{rng, Matrix, NumError};

pub const PREDICTED_RELATION: &str = "predicted_link";

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("not enough non-edges: need {needed}, graph has {available}")]
    NotEnoughNegatives { needed: usize, available: usize },
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Num(#[from] NumError),
}

pub type Result<T> = std::result::Result<T, LinkError>;

/// Undirected simple graph over nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkGraph {
    adj: Vec<BTreeSet<usize>>,
}

impl LinkGraph {
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![BTreeSet::new(); n];
        for &(u, v) in pairs {
            if u == v || u >= n || v >= n {
                return Err(LinkError::InvalidArgument(format!("bad edge ({u},{v}) for {n} nodes")));
            }
            adj[u].insert(v);
            adj[v].insert(u);
        }
        Ok(LinkGraph { adj })
    }

    /// Person-to-person structure of a property graph, direction and relation ignored.
    pub fn from_property_graph(g: &PropertyGraph) -> Self {
        let pairs: Vec<(usize, usize)> = g.undirected_pairs().into_iter().collect();
        LinkGraph::from_pairs(g.node_count(), &pairs).expect("property graph edges are valid")
    }

    /// Two `m`-cliques joined through a path of `p` extra nodes.
    pub fn barbell(m: usize, p: usize) -> Self {
        let n = 2 * m + p;
        let mut pairs = Vec::new();
        for base in [0, m + p] {
            for i in 0..m {
                for j in i + 1..m {
                    pairs.push((base + i, base + j));
                }
            }
        }
        for v in m - 1..m + p {
            pairs.push((v, v + 1));
        }
        LinkGraph::from_pairs(n, &pairs).expect("barbell edges are valid")
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, v: usize) -> &BTreeSet<usize> {
        &self.adj[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj.get(u).is_some_and(|s| s.contains(&v))
    }

    /// Edges as `(min, max)`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (u, nb) in self.adj.iter().enumerate() {
            out.extend(nb.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        out
    }

    /// Non-adjacent pairs `(u, v)` with `u < v`, sorted.
    pub fn non_edges(&self) -> Vec<(usize, usize)> {
        let n = self.node_count();
        let mut out = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if !self.adj[u].contains(&v) {
                    out.push((u, v));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSplit {
    pub train_pos: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub train_neg: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
    pub seed: u64,
}

/// Seeded shuffle of the edges into train and test positives, with as many
/// negatives per side drawn without replacement from the non-edges.
pub fn split_edges(g: &LinkGraph, test_fraction: f64, seed: u64) -> Result<EdgeSplit> {
    let mut edges = g.edges();
    if edges.len() < 2 {
        return Err(LinkError::InvalidArgument(format!("{} edges; need at least 2", edges.len())));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(LinkError::InvalidArgument(format!("test fraction {test_fraction} outside (0,1)")));
    }
    let non_edges = g.non_edges();
    if non_edges.len() < edges.len() {
        return Err(LinkError::NotEnoughNegatives {
            needed: edges.len(),
            available: non_edges.len(),
        });
    }
    let mut r = rng::seeded(seed);
    edges.shuffle(&mut r);
    let n_test = ((edges.len() as f64 * test_fraction).round() as usize).clamp(1, edges.len() - 1);
    let negs: Vec<(usize, usize)> = sample(&mut r, non_edges.len(), edges.len())
        .into_iter()
        .map(|i| non_edges[i])
        .collect();
    Ok(EdgeSplit {
        test_pos: edges[..n_test].to_vec(),
        train_pos: edges[n_test..].to_vec(),
        test_neg: negs[..n_test].to_vec(),
        train_neg: negs[n_test..].to_vec(),
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSource {
    AttributeOneHot,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFeatures {
    pub matrix: Matrix,
    pub source: FeatureSource,
}

impl NodeFeatures {
    pub fn constant(n: usize) -> Self {
        NodeFeatures {
            matrix: Matrix::from_vec(n, 1, vec![1.0; n]).expect("n × 1"),
            source: FeatureSource::Constant,
        }
    }

    /// One-hot columns for the `top` most frequent `(attribute, value)` pairs
    /// (ties broken lexicographically) plus a constant column.
    pub fn from_attributes(g: &PropertyGraph, top: usize) -> Self {
        let mut counts: BTreeMap<(&str, &str), usize> = BTreeMap::new();
        for node in g.nodes() {
            for (k, vals) in &node.attributes {
                for v in vals {
                    *counts.entry((k.as_str(), v.as_str())).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<((&str, &str), usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(top);
        let n = g.node_count();
        let mut m = Matrix::zeros(n, ranked.len() + 1);
        for node in g.nodes() {
            for (j, ((k, v), _)) in ranked.iter().enumerate() {
                if node.attributes.get(*k).is_some_and(|s| s.contains(*v)) {
                    m[(node.node_id, j)] = 1.0;
                }
            }
            m[(node.node_id, ranked.len())] = 1.0;
        }
        NodeFeatures {
            matrix: m,
            source: FeatureSource::AttributeOneHot,
        }
    }
}

/// Mann–Whitney AUC with ties counted as one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(LinkError::InvalidArgument("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(LinkError::InvalidArgument("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(LinkError::InvalidArgument("both classes must be present".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the rank sum of the positives, with tied groups at their mean rank
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let tied_pos = idx[i..=j].iter().filter(|&&k| labels[k]).count() as u128;
        // ranks i+1..=j+1 average to (i+j+2)/2
        rank_sum2 += tied_pos * (i + j + 2) as u128;
        i = j + 1;
    }
    let (p, q) = (pos as u128, neg as u128);
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * q) as f64)
}

/// Adds a predicted edge for every unconnected pair scoring at least `threshold`.
pub fn augment_with_predictions(g: &PropertyGraph, m: &LinkModel, threshold: f64) -> Result<PropertyGraph> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(LinkError::InvalidArgument(format!("threshold {threshold} outside (0,1]")));
    }
    let n = g.node_count();
    if m.embeddings.rows() != n {
        return Err(LinkError::InvalidArgument(format!(
            "model covers {} nodes, graph has {n}",
            m.embeddings.rows()
        )));
    }
    let lg = LinkGraph::from_property_graph(g);
    let candidates = lg.non_edges();
    let scores = score_pairs(m, &candidates)?;
    let mut out = g.clone();
    for (&(u, v), &s) in candidates.iter().zip(&scores) {
        if s >= threshold {
            out.add_edge(u, v, PREDICTED_RELATION, EdgeProvenance::Predicted, s)
                .map_err(|e| LinkError::InvalidArgument(e.to_string()))?;
        }
    }
    Ok(out)
}

/// Test AUC of a trained model on its split.
pub fn test_auc(m: &LinkModel, split: &EdgeSplit) -> Result<f64> {
    let mut pairs = split.test_pos.clone();
    pairs.extend(&split.test_neg);
    let labels: Vec<bool> = (0..pairs.len()).map(|i| i < split.test_pos.len()).collect();
    roc_auc(&score_pairs(m, &pairs)?, &labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub model: String,
    /// Mean test AUC over the seeds.
    pub roc_auc: f64,
    /// Sample standard deviation (n − 1) of the per-seed AUCs.
    pub std_dev: f64,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<f64>,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Trains each model kind once per seed (split and weights both seeded by it).
pub fn benchmark(
    g: &LinkGraph,
    features: &NodeFeatures,
    kinds: &[ModelKind],
    seeds: &[u64],
    test_fraction: f64,
    hp: &Hyperparams,
) -> Result<Vec<ModelMetrics>> {
    let mut out = Vec::new();
    for &kind in kinds {
        let mut aucs = Vec::new();
        for &seed in seeds {
            let split = split_edges(g, test_fraction, rng::substream(seed, "split"))?;
            let hp = Hyperparams {
                seed: rng::substream(seed, kind.name()),
                ..hp.clone()
            };
            let m = train_link_model(kind, g, &split, features, &hp)?;
            aucs.push(test_auc(&m, &split)?);
        }
        let (mean, std) = mean_std(&aucs);
        out.push(ModelMetrics {
            model: kind.name().into(),
            roc_auc: mean,
            std_dev: std,
            seeds: seeds.to_vec(),
            per_seed: aucs,
        });
    }
    Ok(out)
}

pub fn metrics_json(metrics: &[ModelMetrics]) -> String {
    serde_json::to_string_pretty(metrics).expect("metrics serialize")
}
