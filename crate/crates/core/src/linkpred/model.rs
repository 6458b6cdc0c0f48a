use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::numcore::{rng, Matrix};

use super::{EdgeSplit, LinkError, LinkGraph, NodeFeatures, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "GCN")]
    Gcn,
    #[serde(rename = "PGNN")]
    Pgnn,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gcn => "GCN",
            ModelKind::Pgnn => "PGNN",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub hidden: usize,
    pub out: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            hidden: 16,
            out: 16,
            learning_rate: 0.01,
            epochs: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    pub kind: ModelKind,
    /// `[W1, W2]`.
    pub parameters: Vec<Matrix>,
    /// PGNN only.
    pub anchor_sets: Vec<Vec<usize>>,
    pub hyperparams: Hyperparams,
    /// Mean logistic loss before each epoch, then after the last.
    pub loss_history: Vec<f64>,
    /// Final node embeddings; pair logits are their inner products.
    pub embeddings: Matrix,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn glorot(rows: usize, cols: usize, r: &mut rng::Rng) -> Matrix {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| r.random_range(-a..a)).collect())
        .expect("shape matches data")
}

/// `D^{-1/2} (A + I) D^{-1/2}` over the training edges.
pub fn normalized_adjacency(g: &LinkGraph) -> Matrix {
    let n = g.node_count();
    let deg: Vec<f64> = (0..n).map(|v| (g.neighbors(v).len() + 1) as f64).collect();
    let mut a = Matrix::zeros(n, n);
    for v in 0..n {
        a[(v, v)] = 1.0 / deg[v];
        for &u in g.neighbors(v) {
            a[(v, u)] = 1.0 / (deg[v] * deg[u]).sqrt();
        }
    }
    a
}

/// Hop distances from `src`; `None` for unreachable nodes.
pub fn bfs(g: &LinkGraph, src: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.node_count()];
    dist[src] = Some(0);
    let mut q = VecDeque::from([src]);
    while let Some(v) = q.pop_front() {
        let d = dist[v].expect("queued nodes are reached");
        for &u in g.neighbors(v) {
            if dist[u].is_none() {
                dist[u] = Some(d + 1);
                q.push_back(u);
            }
        }
    }
    dist
}

/// ⌈log₂ n⌉ copies of anchor sets at each size ⌈n/2^i⌉, i = 1..=⌈log₂ n⌉.
pub fn anchor_sets(n: usize, r: &mut rng::Rng) -> Vec<Vec<usize>> {
    let levels = (n.max(2) as f64).log2().ceil() as usize;
    let mut sets = Vec::with_capacity(levels * levels);
    for i in 1..=levels {
        let size = n.div_ceil(1 << i).max(1);
        for _ in 0..levels {
            let mut s = sample(r, n, size).into_vec();
            s.sort_unstable();
            sets.push(s);
        }
    }
    sets
}

/// Per node and anchor set, the mean over anchors `a` of `1/(d(v,a)+1)·[x_v, x_a]`
/// (zero weight when unreachable), concatenated over anchor sets.
pub fn anchor_features(g: &LinkGraph, x: &Matrix, sets: &[Vec<usize>]) -> Matrix {
    let n = g.node_count();
    let d = x.cols();
    let dist: Vec<Vec<Option<usize>>> = (0..n).map(|v| bfs(g, v)).collect();
    let mut f = Matrix::zeros(n, sets.len() * 2 * d);
    for v in 0..n {
        let row = f.row_mut(v);
        for (k, set) in sets.iter().enumerate() {
            let base = k * 2 * d;
            for &a in set {
                let w = dist[v][a].map_or(0.0, |h| 1.0 / (h as f64 + 1.0)) / set.len() as f64;
                for c in 0..d {
                    row[base + c] += w * x[(v, c)];
                    row[base + d + c] += w * x[(a, c)];
                }
            }
        }
    }
    f
}

fn relu(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for i in 0..out.rows() {
        for v in out.row_mut(i) {
            *v = v.max(0.0);
        }
    }
    out
}

/// Loss and gradient of the mean logistic loss with respect to the embeddings.
fn pair_loss(z: &Matrix, pairs: &[(usize, usize)], labels: &[f64]) -> (f64, Matrix) {
    let mut grad = Matrix::zeros(z.rows(), z.cols());
    let p = pairs.len() as f64;
    let mut loss = 0.0;
    for (&(u, v), &y) in pairs.iter().zip(labels) {
        let s: f64 = z.row(u).iter().zip(z.row(v)).map(|(a, b)| a * b).sum();
        // log(1 + e^s) − y·s, computed stably
        loss += s.max(0.0) + (-s.abs()).exp().ln_1p() - y * s;
        let g = (sigmoid(s) - y) / p;
        for c in 0..z.cols() {
            let (zu, zv) = (z[(u, c)], z[(v, c)]);
            grad[(u, c)] += g * zv;
            grad[(v, c)] += g * zu;
        }
    }
    (loss / p, grad)
}

/// Forward pass shared by both models: `Z = P · relu(M · W1) · W2`, where
/// `M` is the fixed input aggregate and `P` the optional output propagation.
struct Net<'a> {
    input: &'a Matrix,
    propagate: Option<&'a Matrix>,
}

struct Forward {
    pre: Matrix,
    hidden_out: Matrix,
    z: Matrix,
}

impl Net<'_> {
    fn forward(&self, w: &[Matrix]) -> Result<Forward> {
        let pre = self.input.matmul(&w[0])?;
        let h = relu(&pre);
        let hidden_out = match self.propagate {
            Some(p) => p.matmul(&h)?,
            None => h,
        };
        let z = hidden_out.matmul(&w[1])?;
        Ok(Forward { pre, hidden_out, z })
    }

    fn backward(&self, w: &[Matrix], f: &Forward, dz: &Matrix) -> Result<[Matrix; 2]> {
        let dw2 = f.hidden_out.transpose().matmul(dz)?;
        let mut dh = dz.matmul(&w[1].transpose())?;
        if let Some(p) = self.propagate {
            // the normalized adjacency is symmetric
            dh = p.matmul(&dh)?;
        }
        for i in 0..dh.rows() {
            for c in 0..dh.cols() {
                if f.pre[(i, c)] <= 0.0 {
                    dh[(i, c)] = 0.0;
                }
            }
        }
        let dw1 = self.input.transpose().matmul(&dh)?;
        Ok([dw1, dw2])
    }
}

fn training_pairs(split: &EdgeSplit) -> (Vec<(usize, usize)>, Vec<f64>) {
    let mut pairs = split.train_pos.clone();
    let mut labels = vec![1.0; pairs.len()];
    pairs.extend(&split.train_neg);
    labels.extend(std::iter::repeat_n(0.0, split.train_neg.len()));
    (pairs, labels)
}

/// Trains a GCN or PGNN on the training positives of `split` (message
/// passing sees only those edges) with full-batch gradient descent.
pub fn train_link_model(
    kind: ModelKind,
    g: &LinkGraph,
    split: &EdgeSplit,
    features: &NodeFeatures,
    hp: &Hyperparams,
) -> Result<LinkModel> {
    let n = g.node_count();
    if features.matrix.rows() != n {
        return Err(LinkError::InvalidArgument(format!(
            "{} feature rows for {n} nodes",
            features.matrix.rows()
        )));
    }
    let train_graph = LinkGraph::from_pairs(n, &split.train_pos)?;
    let mut r = rng::seeded(hp.seed);
    let (input, propagate, anchors) = match kind {
        ModelKind::Gcn => {
            let a = normalized_adjacency(&train_graph);
            let m0 = a.matmul(&features.matrix)?;
            (m0, Some(a), Vec::new())
        }
        ModelKind::Pgnn => {
            let sets = anchor_sets(n, &mut r);
            (anchor_features(&train_graph, &features.matrix, &sets), None, sets)
        }
    };
    let net = Net {
        input: &input,
        propagate: propagate.as_ref(),
    };
    let mut w = vec![
        glorot(input.cols(), hp.hidden, &mut r),
        glorot(hp.hidden, hp.out, &mut r),
    ];
    let (pairs, labels) = training_pairs(split);
    let mut history = Vec::with_capacity(hp.epochs + 1);
    for epoch in 0..=hp.epochs {
        let f = net.forward(&w)?;
        let (loss, dz) = pair_loss(&f.z, &pairs, &labels);
        if !loss.is_finite() {
            return Err(LinkError::Diverged { epoch });
        }
        history.push(loss);
        if epoch == hp.epochs {
            break;
        }
        let grads = net.backward(&w, &f, &dz)?;
        for (wi, gi) in w.iter_mut().zip(grads) {
            *wi = wi.sub(&gi.scale(hp.learning_rate))?;
        }
    }
    let embeddings = net.forward(&w)?.z;
    Ok(LinkModel {
        kind,
        parameters: w,
        anchor_sets: anchors,
        hyperparams: hp.clone(),
        loss_history: history,
        embeddings,
    })
}

/// Sigmoid of the embedding inner product for each pair.
pub fn score_pairs(m: &LinkModel, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    let n = m.embeddings.rows();
    pairs
        .iter()
        .map(|&(u, v)| {
            if u == v {
                return Err(LinkError::InvalidArgument(format!("self pair ({u},{u})")));
            }
            if u >= n || v >= n {
                return Err(LinkError::InvalidArgument(format!("pair ({u},{v}) outside {n} nodes")));
            }
            let s: f64 = m.embeddings.row(u).iter().zip(m.embeddings.row(v)).map(|(a, b)| a * b).sum();
            Ok(sigmoid(s))
        })
        .collect()
}
