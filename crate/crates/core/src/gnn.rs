//! Message-passing graph neural network producing fixed-size graph embeddings.
//!
//! Each layer computes `h'_v = ReLU(W_self h_v + W_nbr mean_{u∈N(v)} h_u + b)`
//! (an empty neighbourhood aggregates to zero). The graph embedding is the
//! mean over nodes of the last layer, projected linearly to `embed_dim`. An
//! optional MLP head (`embed_dim → head_hidden → 2`) is used for classical
//! pretraining. All weights live in one flat vector so optimizers can treat
//! θ_G as a single parameter array.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::compute_weighted_metrics;
use crate::optim::Adam;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n_nodes: usize,
    f_in: usize,
    /// Row-major `n_nodes × f_in`.
    features: Vec<f64>,
    edges: Vec<(usize, usize)>,
    label: u8,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(n_nodes: usize, f_in: usize, features: Vec<f64>, edges: Vec<(usize, usize)>, label: u8) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::Degenerate("graph needs at least one node".into()));
        }
        if features.len() != n_nodes * f_in {
            return Err(Error::Dimension {
                expected: n_nodes * f_in,
                actual: features.len(),
            });
        }
        if label > 1 {
            return Err(Error::Degenerate(format!("label {label} is not binary")));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut neighbors = vec![Vec::new(); n_nodes];
        for &(a, b) in &edges {
            if a >= n_nodes || b >= n_nodes {
                return Err(Error::index(format!("edge ({a}, {b}) outside {n_nodes} nodes")));
            }
            if a == b {
                return Err(Error::Degenerate(format!("self-loop on node {a}")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::Degenerate(format!("duplicate edge ({a}, {b})")));
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        Ok(Self {
            n_nodes,
            f_in,
            features,
            edges,
            label,
            neighbors,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn f_in(&self) -> usize {
        self.f_in
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn node_features(&self, v: usize) -> &[f64] {
        &self.features[v * self.f_in..(v + 1) * self.f_in]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn label(&self) -> u8 {
        self.label
    }

    /// Relabels nodes so that old node `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n_nodes {
            return Err(Error::Dimension {
                expected: self.n_nodes,
                actual: perm.len(),
            });
        }
        let mut features = vec![0.0; self.features.len()];
        for v in 0..self.n_nodes {
            let dst = perm[v] * self.f_in;
            features[dst..dst + self.f_in].copy_from_slice(self.node_features(v));
        }
        let edges = self.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        Graph::new(self.n_nodes, self.f_in, features, edges, self.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GnnConfig {
    pub f_in: usize,
    pub hidden: usize,
    pub n_layers: usize,
    pub embed_dim: usize,
    /// Width of the MLP head's hidden layer; 0 disables the head.
    pub head_hidden: usize,
}

impl GnnConfig {
    pub fn new(f_in: usize, embed_dim: usize) -> Self {
        Self {
            f_in,
            hidden: 64,
            n_layers: 3,
            embed_dim,
            head_hidden: 64,
        }
    }

    pub fn has_head(&self) -> bool {
        self.head_hidden > 0
    }
}

/// Offsets of one dense block inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Dense {
    w: usize,
    b: usize,
    n_in: usize,
    n_out: usize,
}

#[derive(Debug, Clone, Copy)]
struct LayerBlock {
    w_self: usize,
    w_nbr: usize,
    b: usize,
    n_in: usize,
    n_out: usize,
}

#[derive(Debug, Clone)]
struct Layout {
    layers: Vec<LayerBlock>,
    readout: Dense,
    head: Option<(Dense, Dense)>,
    total: usize,
}

impl Layout {
    fn new(c: &GnnConfig) -> Self {
        let mut off = 0;
        let mut layers = Vec::with_capacity(c.n_layers);
        for l in 0..c.n_layers {
            let n_in = if l == 0 { c.f_in } else { c.hidden };
            let n_out = c.hidden;
            let w_self = off;
            let w_nbr = w_self + n_in * n_out;
            let b = w_nbr + n_in * n_out;
            off = b + n_out;
            layers.push(LayerBlock {
                w_self,
                w_nbr,
                b,
                n_in,
                n_out,
            });
        }
        let last = if c.n_layers == 0 { c.f_in } else { c.hidden };
        let mut dense = |n_in: usize, n_out: usize| {
            let d = Dense {
                w: off,
                b: off + n_in * n_out,
                n_in,
                n_out,
            };
            off += n_in * n_out + n_out;
            d
        };
        let readout = dense(last, c.embed_dim);
        let head = c
            .has_head()
            .then(|| (dense(c.embed_dim, c.head_hidden), dense(c.head_hidden, 2)));
        Self {
            layers,
            readout,
            head,
            total: off,
        }
    }
}

/// `out = W x + b` with W row-major `n_out × n_in`.
fn affine(theta: &[f64], d: Dense, x: &[f64]) -> Vec<f64> {
    let w = &theta[d.w..d.w + d.n_in * d.n_out];
    let b = &theta[d.b..d.b + d.n_out];
    (0..d.n_out)
        .map(|o| b[o] + dot(&w[o * d.n_in..(o + 1) * d.n_in], x))
        .collect()
}

/// Accumulates gradients of `W x + b` given upstream `dy`; returns dx.
fn affine_backward(theta: &[f64], grad: &mut [f64], d: Dense, x: &[f64], dy: &[f64]) -> Vec<f64> {
    let mut dx = vec![0.0; d.n_in];
    for o in 0..d.n_out {
        if dy[o] == 0.0 {
            continue;
        }
        grad[d.b + o] += dy[o];
        let row = d.w + o * d.n_in;
        for i in 0..d.n_in {
            grad[row + i] += dy[o] * x[i];
            dx[i] += dy[o] * theta[row + i];
        }
    }
    dx
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Per layer: node inputs, mean-aggregated neighbour inputs, pre-activations
    /// (all row-major, one row per node).
    inputs: Vec<Vec<f64>>,
    aggregates: Vec<Vec<f64>>,
    preacts: Vec<Vec<f64>>,
    pooled: Vec<f64>,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnModel {
    pub config: GnnConfig,
    theta: Vec<f64>,
}

impl GnnModel {
    /// Weights uniform in ±1/√fan_in, biases zero.
    pub fn init(config: GnnConfig, seed: u64) -> Result<Self> {
        if config.f_in == 0 || config.hidden == 0 || config.embed_dim == 0 {
            return Err(Error::config("GNN widths must be positive"));
        }
        let layout = Layout::new(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = vec![0.0; layout.total];
        let mut fill = |w: usize, n_in: usize, n_out: usize| {
            let bound = 1.0 / (n_in as f64).sqrt();
            for v in &mut theta[w..w + n_in * n_out] {
                *v = rng.gen_range(-bound..bound);
            }
        };
        for l in &layout.layers {
            fill(l.w_self, l.n_in, l.n_out);
            fill(l.w_nbr, l.n_in, l.n_out);
        }
        fill(layout.readout.w, layout.readout.n_in, layout.readout.n_out);
        if let Some((h1, h2)) = layout.head {
            fill(h1.w, h1.n_in, h1.n_out);
            fill(h2.w, h2.n_in, h2.n_out);
        }
        Ok(Self { config, theta })
    }

    pub fn from_params(config: GnnConfig, theta: Vec<f64>) -> Result<Self> {
        let expected = Layout::new(&config).total;
        if theta.len() != expected {
            return Err(Error::Arity {
                expected,
                actual: theta.len(),
            });
        }
        Ok(Self { config, theta })
    }

    pub fn n_params(&self) -> usize {
        self.theta.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.theta
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn embed_dim(&self) -> usize {
        self.config.embed_dim
    }

    fn check_graph(&self, graph: &Graph) -> Result<()> {
        if graph.f_in() != self.config.f_in {
            return Err(Error::Dimension {
                expected: self.config.f_in,
                actual: graph.f_in(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, graph: &Graph) -> Result<ForwardCache> {
        self.check_graph(graph)?;
        let layout = Layout::new(&self.config);
        let n = graph.n_nodes();
        let mut h = graph.features().to_vec();
        let mut inputs = Vec::with_capacity(layout.layers.len());
        let mut aggregates = Vec::with_capacity(layout.layers.len());
        let mut preacts = Vec::with_capacity(layout.layers.len());
        for l in &layout.layers {
            let agg = mean_aggregate(graph, &h, l.n_in);
            let ws = Dense {
                w: l.w_self,
                b: l.b,
                n_in: l.n_in,
                n_out: l.n_out,
            };
            let mut z = Vec::with_capacity(n * l.n_out);
            let wn = &self.theta[l.w_nbr..l.w_nbr + l.n_in * l.n_out];
            for v in 0..n {
                let hv = &h[v * l.n_in..(v + 1) * l.n_in];
                let mv = &agg[v * l.n_in..(v + 1) * l.n_in];
                let mut zv = affine(&self.theta, ws, hv);
                for (o, z) in zv.iter_mut().enumerate() {
                    *z += dot(&wn[o * l.n_in..(o + 1) * l.n_in], mv);
                }
                z.extend(zv);
            }
            let next = z.iter().map(|&v| v.max(0.0)).collect();
            inputs.push(std::mem::replace(&mut h, next));
            aggregates.push(agg);
            preacts.push(z);
        }
        let width = layout.readout.n_in;
        let mut pooled = vec![0.0; width];
        for v in 0..n {
            for (p, x) in pooled.iter_mut().zip(&h[v * width..(v + 1) * width]) {
                *p += x;
            }
        }
        pooled.iter_mut().for_each(|p| *p /= n as f64);
        let embedding = affine(&self.theta, layout.readout, &pooled);
        Ok(ForwardCache {
            inputs,
            aggregates,
            preacts,
            pooled,
            embedding,
        })
    }

    /// Embed(x; θ_G).
    pub fn embed(&self, graph: &Graph) -> Result<Vec<f64>> {
        Ok(self.forward(graph)?.embedding)
    }

    /// Gradient of a scalar w.r.t. θ_G given its gradient w.r.t. the
    /// embedding. Head entries are left at zero.
    pub fn backward(&self, graph: &Graph, cache: &ForwardCache, d_embedding: &[f64]) -> Result<Vec<f64>> {
        if d_embedding.len() != self.config.embed_dim {
            return Err(Error::Dimension {
                expected: self.config.embed_dim,
                actual: d_embedding.len(),
            });
        }
        let layout = Layout::new(&self.config);
        let mut grad = vec![0.0; layout.total];
        self.backward_into(graph, cache, d_embedding, &layout, &mut grad);
        Ok(grad)
    }

    fn backward_into(&self, graph: &Graph, cache: &ForwardCache, d_embedding: &[f64], layout: &Layout, grad: &mut [f64]) {
        let n = graph.n_nodes();
        let d_pooled = affine_backward(&self.theta, grad, layout.readout, &cache.pooled, d_embedding);
        let width = layout.readout.n_in;
        // Mean pooling spreads the gradient evenly over nodes.
        let mut dh: Vec<f64> = (0..n)
            .flat_map(|_| d_pooled.iter().map(|g| g / n as f64))
            .collect();
        debug_assert_eq!(dh.len(), n * width);

        for (li, l) in layout.layers.iter().enumerate().rev() {
            let input = &cache.inputs[li];
            let agg = &cache.aggregates[li];
            let z = &cache.preacts[li];
            let mut dz = dh;
            for (d, &zv) in dz.iter_mut().zip(z) {
                if zv <= 0.0 {
                    *d = 0.0;
                }
            }
            let ws = Dense {
                w: l.w_self,
                b: l.b,
                n_in: l.n_in,
                n_out: l.n_out,
            };
            let mut d_input = vec![0.0; n * l.n_in];
            let mut d_agg = vec![0.0; n * l.n_in];
            for v in 0..n {
                let dzv = &dz[v * l.n_out..(v + 1) * l.n_out];
                if dzv.iter().all(|&g| g == 0.0) {
                    continue;
                }
                let dx = affine_backward(&self.theta, grad, ws, &input[v * l.n_in..(v + 1) * l.n_in], dzv);
                d_input[v * l.n_in..(v + 1) * l.n_in]
                    .iter_mut()
                    .zip(dx)
                    .for_each(|(a, b)| *a += b);
                let mv = &agg[v * l.n_in..(v + 1) * l.n_in];
                for o in 0..l.n_out {
                    if dzv[o] == 0.0 {
                        continue;
                    }
                    let row = l.w_nbr + o * l.n_in;
                    for i in 0..l.n_in {
                        grad[row + i] += dzv[o] * mv[i];
                        d_agg[v * l.n_in + i] += dzv[o] * self.theta[row + i];
                    }
                }
            }
            // Transpose of the mean aggregation.
            for v in 0..n {
                let nb = graph.neighbors(v);
                if nb.is_empty() {
                    continue;
                }
                let inv = 1.0 / nb.len() as f64;
                for &u in nb {
                    for i in 0..l.n_in {
                        d_input[u * l.n_in + i] += d_agg[v * l.n_in + i] * inv;
                    }
                }
            }
            dh = d_input;
        }
    }

    /// Logits of the MLP head for an embedding.
    pub fn head_logits(&self, embedding: &[f64]) -> Result<[f64; 2]> {
        let layout = Layout::new(&self.config);
        let (h1, h2) = layout
            .head
            .ok_or_else(|| Error::Usage("model has no classification head".into()))?;
        let a: Vec<f64> = affine(&self.theta, h1, embedding)
            .into_iter()
            .map(|v| v.max(0.0))
            .collect();
        let out = affine(&self.theta, h2, &a);
        Ok([out[0], out[1]])
    }

    pub fn predict_class(&self, graph: &Graph) -> Result<u8> {
        let logits = self.head_logits(&self.embed(graph)?)?;
        Ok(u8::from(logits[1] > logits[0]))
    }

    /// Softmax cross-entropy of the head on one graph and its gradient over θ_G.
    pub fn classification_loss_grad(&self, graph: &Graph) -> Result<(f64, Vec<f64>)> {
        let layout = Layout::new(&self.config);
        let (h1, h2) = layout
            .head
            .ok_or_else(|| Error::Usage("model has no classification head".into()))?;
        let cache = self.forward(graph)?;
        let z1 = affine(&self.theta, h1, &cache.embedding);
        let a1: Vec<f64> = z1.iter().map(|v| v.max(0.0)).collect();
        let logits = affine(&self.theta, h2, &a1);
        let (loss, probs) = softmax_xent(&logits, graph.label() as usize);

        let mut grad = vec![0.0; layout.total];
        let mut dlogits = probs;
        dlogits[graph.label() as usize] -= 1.0;
        let mut da1 = affine_backward(&self.theta, &mut grad, h2, &a1, &dlogits);
        for (d, &z) in da1.iter_mut().zip(&z1) {
            if z <= 0.0 {
                *d = 0.0;
            }
        }
        let demb = affine_backward(&self.theta, &mut grad, h1, &cache.embedding, &da1);
        self.backward_into(graph, &cache, &demb, &layout, &mut grad);
        Ok((loss, grad))
    }
}

fn mean_aggregate(graph: &Graph, h: &[f64], width: usize) -> Vec<f64> {
    let n = graph.n_nodes();
    let mut agg = vec![0.0; n * width];
    for v in 0..n {
        let nb = graph.neighbors(v);
        if nb.is_empty() {
            continue;
        }
        let row = &mut agg[v * width..(v + 1) * width];
        for &u in nb {
            for (a, x) in row.iter_mut().zip(&h[u * width..(u + 1) * width]) {
                *a += x;
            }
        }
        let inv = 1.0 / nb.len() as f64;
        row.iter_mut().for_each(|a| *a *= inv);
    }
    agg
}

/// (−log softmax(z)[target], softmax(z)).
pub(crate) fn softmax_xent(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let probs: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    let loss = -(logits[target] - max - sum.ln());
    (loss, probs)
}

/// θ_G gradient for a batch of graphs given per-graph embedding gradients.
pub fn gnn_forward_backward(model: &GnnModel, graph: &Graph, d_embedding: &[f64]) -> Result<Vec<f64>> {
    let cache = model.forward(graph)?;
    model.backward(graph, &cache, d_embedding)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub patience: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            patience: 10,
            lr: 1e-2,
            batch_size: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PretrainEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_weighted_f1: f64,
}

#[derive(Debug, Clone)]
pub struct PretrainResult {
    pub model: GnnModel,
    pub best_epoch: usize,
    pub best_val_f1: f64,
    pub history: Vec<PretrainEpoch>,
}

/// Classification accuracy metrics of the MLP head on a split.
pub fn head_weighted_f1(model: &GnnModel, graphs: &[&Graph]) -> Result<f64> {
    let preds = graphs
        .par_iter()
        .map(|g| model.predict_class(g))
        .collect::<Result<Vec<u8>>>()?;
    let labels: Vec<u8> = graphs.iter().map(|g| g.label()).collect();
    Ok(compute_weighted_metrics(&preds, &labels)?.weighted_f1)
}

/// Trains the GNN and its MLP head with Adam on softmax cross-entropy,
/// early-stopping on validation weighted F1. Returns the best-on-validation
/// parameters (epoch 0 is the untrained model).
pub fn pretrain_classical(model: &GnnModel, train: &[&Graph], val: &[&Graph], config: &PretrainConfig) -> Result<PretrainResult> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Usage("pretraining needs non-empty train and validation splits".into()));
    }
    if !model.config.has_head() {
        return Err(Error::Usage("pretraining needs a model with a classification head".into()));
    }
    let mut model = model.clone();
    let mut adam = Adam::new(model.n_params(), config.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let batch = config.batch_size.max(1);

    let mut best = model.clone();
    let mut best_f1 = head_weighted_f1(&model, val)?;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut history = Vec::new();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let per = chunk
                .par_iter()
                .map(|&i| model.classification_loss_grad(train[i]))
                .collect::<Result<Vec<_>>>()?;
            let mut grad = vec![0.0; model.n_params()];
            for (loss, g) in &per {
                total += loss;
                for (acc, v) in grad.iter_mut().zip(g) {
                    *acc += v / chunk.len() as f64;
                }
            }
            adam.step(model.params_mut(), &grad)?;
        }
        let train_loss = total / train.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::numerical(format!("training loss became {train_loss} at epoch {epoch}")));
        }
        let val_f1 = head_weighted_f1(&model, val)?;
        history.push(PretrainEpoch {
            epoch,
            train_loss,
            val_weighted_f1: val_f1,
        });
        if val_f1 > best_f1 {
            best_f1 = val_f1;
            best = model.clone();
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    Ok(PretrainResult {
        model: best,
        best_epoch,
        best_val_f1: best_f1,
        history,
    })
}
