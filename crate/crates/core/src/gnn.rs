//! Relation-typed node embedding over the disjunctive graph.
//!
//! One layer updates every unfinished node `v` as
//!
//! ```text
//! h_v' = f_n( relu(f_p(sum h over predecessors))
//!           | relu(f_s(sum h over successors))
//!           | relu(f_d(sum h over same-machine nodes))
//!           | relu(sum h over all nodes)
//!           | h_v
//!           | h_v^0 )
//! ```
//!
//! Finished nodes carry the zero vector at every depth, so they drop out of
//! every sum and receive no gradient. Empty neighbour sets sum to zero.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::nn::{Mlp, NnError, Tape};

/// Width of node features and node embeddings.
pub const EMBED_DIM: usize = 8;
const NODE_INPUT: usize = 6 * EMBED_DIM;

/// Graph structure seen by the embedding stack. `groups` are cliques of
/// disjunctive arcs (one per machine); a node belongs to at most one group.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    pub predecessor: Vec<Option<usize>>,
    pub successor: Vec<Option<usize>>,
    pub group_of: Vec<Option<usize>>,
    pub groups: Vec<Vec<usize>>,
}

impl Adjacency {
    /// Nodes with no arcs at all.
    pub fn isolated(n: usize) -> Self {
        Adjacency {
            predecessor: vec![None; n],
            successor: vec![None; n],
            group_of: vec![None; n],
            groups: Vec::new(),
        }
    }

    pub fn from_graph(graph: &crate::simulator::DisjunctiveGraph) -> Self {
        let n = graph.num_nodes();
        let groups: Vec<Vec<usize>> = graph.machine_groups().to_vec();
        let mut group_of = vec![None; n];
        for (g, members) in groups.iter().enumerate() {
            for &v in members {
                group_of[v] = Some(g);
            }
        }
        Adjacency {
            predecessor: (0..n).map(|v| graph.predecessor(v)).collect(),
            successor: (0..n).map(|v| graph.successor(v)).collect(),
            group_of,
            groups,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.predecessor.len()
    }
}

/// Node features (`n x 8`, row-major) plus which nodes are still live.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub adjacency: Adjacency,
    pub features: Vec<f64>,
    pub active: Vec<bool>,
}

impl GraphInput {
    fn check(&self) -> Result<usize, NnError> {
        let n = self.adjacency.num_nodes();
        if self.features.len() != n * EMBED_DIM {
            return Err(NnError::ShapeMismatch { expected: n * EMBED_DIM, got: self.features.len() });
        }
        if self.active.len() != n {
            return Err(NnError::ShapeMismatch { expected: n, got: self.active.len() });
        }
        Ok(n)
    }

    /// `H^(0)`: the features with finished rows zeroed.
    fn initial_embedding(&self) -> Vec<f64> {
        let mut h0 = self.features.clone();
        for (v, &live) in self.active.iter().enumerate() {
            if !live {
                h0[v * EMBED_DIM..(v + 1) * EMBED_DIM].fill(0.0);
            }
        }
        h0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingLayer {
    pub precedent: Mlp,
    pub succedent: Mlp,
    pub disjunctive: Mlp,
    pub node: Mlp,
}

impl EmbeddingLayer {
    pub fn new(hidden: usize, seed: u64) -> Self {
        let s = seed.wrapping_mul(4);
        EmbeddingLayer {
            precedent: Mlp::with_hidden(EMBED_DIM, hidden, EMBED_DIM, s),
            succedent: Mlp::with_hidden(EMBED_DIM, hidden, EMBED_DIM, s + 1),
            disjunctive: Mlp::with_hidden(EMBED_DIM, hidden, EMBED_DIM, s + 2),
            node: Mlp::with_hidden(NODE_INPUT, hidden, EMBED_DIM, s + 3),
        }
    }

    pub fn mlps(&self) -> [&Mlp; 4] {
        [&self.precedent, &self.succedent, &self.disjunctive, &self.node]
    }

    pub fn mlps_mut(&mut self) -> [&mut Mlp; 4] {
        [&mut self.precedent, &mut self.succedent, &mut self.disjunctive, &mut self.node]
    }
}

/// `depth` embedding layers. With `shared` set, one layer's parameters are
/// reused at every depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnStack {
    layers: Vec<EmbeddingLayer>,
    depth: usize,
}

/// Per-depth embeddings `H^(0..=K)` and the final graph-level sum.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub layers: Vec<Vec<f64>>,
    pub graph_embedding: [f64; EMBED_DIM],
}

impl EmbeddingSet {
    pub fn last(&self) -> &[f64] {
        self.layers.last().expect("at least H^(0)")
    }

    pub fn node(&self, v: usize) -> &[f64] {
        &self.last()[v * EMBED_DIM..(v + 1) * EMBED_DIM]
    }
}

#[derive(Debug, Clone)]
struct LayerTape {
    active: Vec<usize>,
    graph_sum: [f64; EMBED_DIM],
    pre_p: Vec<f64>,
    pre_s: Vec<f64>,
    pre_d: Vec<f64>,
    tapes: [Tape; 4],
}

/// Everything [`GnnStack::backward`] needs from a forward pass.
#[derive(Debug, Clone)]
pub struct GnnTape {
    n: usize,
    live: Vec<bool>,
    adjacency: Adjacency,
    layers: Vec<LayerTape>,
}

impl GnnStack {
    pub fn new(depth: usize, hidden: usize, shared: bool, seed: u64) -> Self {
        assert!(depth >= 1);
        let distinct = if shared { 1 } else { depth };
        let layers = (0..distinct).map(|k| EmbeddingLayer::new(hidden, seed.wrapping_add(k as u64))).collect();
        GnnStack { layers, depth }
    }

    /// Rebuilds a stack from layers; `layers.len()` must be 1 (shared) or `depth`.
    pub fn from_layers(layers: Vec<EmbeddingLayer>, depth: usize) -> Result<Self, NnError> {
        if depth == 0 || (layers.len() != 1 && layers.len() != depth) {
            return Err(NnError::ShapeMismatch { expected: depth, got: layers.len() });
        }
        Ok(GnnStack { layers, depth })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn is_shared(&self) -> bool {
        self.layers.len() == 1 && self.depth > 1
    }

    pub fn layers(&self) -> &[EmbeddingLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [EmbeddingLayer] {
        &mut self.layers
    }

    /// Number of distinct MLPs, i.e. gradient slots.
    pub fn num_mlps(&self) -> usize {
        4 * self.layers.len()
    }

    fn layer_index(&self, k: usize) -> usize {
        if self.layers.len() == 1 { 0 } else { k }
    }

    /// Final-depth embeddings only; no tape.
    pub fn embed(&self, input: &GraphInput) -> Result<EmbeddingSet, NnError> {
        self.run(input, false).map(|(set, _)| set)
    }

    /// Full forward pass returning all depths and a tape for [`Self::backward`].
    pub fn embed_tape(&self, input: &GraphInput) -> Result<(EmbeddingSet, GnnTape), NnError> {
        self.run(input, true).map(|(set, tape)| (set, tape.expect("recorded")))
    }

    fn run(&self, input: &GraphInput, record: bool) -> Result<(EmbeddingSet, Option<GnnTape>), NnError> {
        let n = input.check()?;
        let active: Vec<usize> = (0..n).filter(|&v| input.active[v]).collect();
        let h0 = input.initial_embedding();
        let mut layers = vec![h0];
        let mut tapes = Vec::new();
        for k in 0..self.depth {
            let layer = &self.layers[self.layer_index(k)];
            let prev = layers.last().expect("nonempty");
            let (next, tape) = forward_layer(layer, &input.adjacency, prev, &layers[0], &active, record)?;
            layers.push(next);
            if let Some(t) = tape {
                tapes.push(t);
            }
        }
        let graph_embedding = sum_rows(layers.last().expect("nonempty"), n);
        let tape = record.then(|| GnnTape {
            n,
            live: input.active.clone(),
            adjacency: input.adjacency.clone(),
            layers: tapes,
        });
        Ok((EmbeddingSet { layers, graph_embedding }, tape))
    }

    /// Reverse pass from `dL/dH^(K)` and `dL/d(graph embedding)`. Parameter
    /// gradients are added into `grads` (one flat vector per MLP, in
    /// `mlps()` order); returns `dL/d(node features)`.
    pub fn backward(
        &self,
        tape: &GnnTape,
        d_final: &[f64],
        d_graph: &[f64; EMBED_DIM],
        grads: &mut [Vec<f64>],
    ) -> Result<Vec<f64>, NnError> {
        let n = tape.n;
        if d_final.len() != n * EMBED_DIM {
            return Err(NnError::ShapeMismatch { expected: n * EMBED_DIM, got: d_final.len() });
        }
        if grads.len() != self.num_mlps() {
            return Err(NnError::ShapeMismatch { expected: self.num_mlps(), got: grads.len() });
        }
        if tape.layers.len() != self.depth {
            return Err(NnError::StaleTape);
        }
        let mut d_h = d_final.to_vec();
        for v in 0..n {
            for (d, g) in d_h[v * EMBED_DIM..(v + 1) * EMBED_DIM].iter_mut().zip(d_graph) {
                *d += g;
            }
        }
        mask_rows(&mut d_h, &tape.live);
        let mut d_h0 = vec![0.0; n * EMBED_DIM];
        for k in (0..self.depth).rev() {
            let li = self.layer_index(k);
            let slots = &mut grads[4 * li..4 * li + 4];
            d_h = backward_layer(&self.layers[li], &tape.adjacency, &tape.layers[k], &d_h, &mut d_h0, slots)?;
            mask_rows(&mut d_h, &tape.live);
        }
        for (a, b) in d_h0.iter_mut().zip(&d_h) {
            *a += b;
        }
        mask_rows(&mut d_h0, &tape.live);
        Ok(d_h0)
    }

    pub fn mlps(&self) -> impl Iterator<Item = &Mlp> {
        self.layers.iter().flat_map(|l| l.mlps())
    }

    pub fn mlps_mut(&mut self) -> impl Iterator<Item = &mut Mlp> {
        self.layers.iter_mut().flat_map(|l| l.mlps_mut())
    }
}

fn sum_rows(h: &[f64], n: usize) -> [f64; EMBED_DIM] {
    let mut out = [0.0; EMBED_DIM];
    for v in 0..n {
        for (o, x) in out.iter_mut().zip(&h[v * EMBED_DIM..(v + 1) * EMBED_DIM]) {
            *o += x;
        }
    }
    out
}

fn mask_rows(x: &mut [f64], live: &[bool]) {
    for (v, &l) in live.iter().enumerate() {
        if !l {
            x[v * EMBED_DIM..(v + 1) * EMBED_DIM].fill(0.0);
        }
    }
}

#[inline]
fn row(x: &[f64], v: usize) -> &[f64] {
    &x[v * EMBED_DIM..(v + 1) * EMBED_DIM]
}

#[inline]
fn add_row(dst: &mut [f64], v: usize, src: &[f64]) {
    for (d, s) in dst[v * EMBED_DIM..(v + 1) * EMBED_DIM].iter_mut().zip(src) {
        *d += s;
    }
}

fn group_sums(adj: &Adjacency, h: &[f64]) -> Vec<[f64; EMBED_DIM]> {
    adj.groups
        .iter()
        .map(|members| {
            let mut s = [0.0; EMBED_DIM];
            for &u in members {
                for (a, b) in s.iter_mut().zip(row(h, u)) {
                    *a += b;
                }
            }
            s
        })
        .collect()
}

fn forward_layer(
    layer: &EmbeddingLayer,
    adj: &Adjacency,
    prev: &[f64],
    h0: &[f64],
    active: &[usize],
    record: bool,
) -> Result<(Vec<f64>, Option<LayerTape>), NnError> {
    let n = adj.num_nodes();
    let na = active.len();
    let mut next = vec![0.0; n * EMBED_DIM];
    let graph_sum = sum_rows(prev, n);
    let gsums = group_sums(adj, prev);
    let mut p_in = vec![0.0; na * EMBED_DIM];
    let mut s_in = vec![0.0; na * EMBED_DIM];
    let mut d_in = vec![0.0; na * EMBED_DIM];
    for (i, &v) in active.iter().enumerate() {
        let dst = i * EMBED_DIM..(i + 1) * EMBED_DIM;
        if let Some(u) = adj.predecessor[v] {
            p_in[dst.clone()].copy_from_slice(row(prev, u));
        }
        if let Some(u) = adj.successor[v] {
            s_in[dst.clone()].copy_from_slice(row(prev, u));
        }
        if let Some(g) = adj.group_of[v] {
            for ((d, s), own) in d_in[dst].iter_mut().zip(&gsums[g]).zip(row(prev, v)) {
                *d = s - own;
            }
        }
    }
    let run = |mlp: &Mlp, x: &[f64]| -> Result<(Vec<f64>, Option<Tape>), NnError> {
        if record {
            mlp.forward_tape(x, na).map(|(y, t)| (y, Some(t)))
        } else {
            mlp.forward(x, na).map(|y| (y, None))
        }
    };
    let (pre_p, tp) = run(&layer.precedent, &p_in)?;
    let (pre_s, ts) = run(&layer.succedent, &s_in)?;
    let (pre_d, td) = run(&layer.disjunctive, &d_in)?;
    let mut x = vec![0.0; na * NODE_INPUT];
    for (i, &v) in active.iter().enumerate() {
        let r = &mut x[i * NODE_INPUT..(i + 1) * NODE_INPUT];
        for c in 0..EMBED_DIM {
            r[c] = pre_p[i * EMBED_DIM + c].max(0.0);
            r[EMBED_DIM + c] = pre_s[i * EMBED_DIM + c].max(0.0);
            r[2 * EMBED_DIM + c] = pre_d[i * EMBED_DIM + c].max(0.0);
            r[3 * EMBED_DIM + c] = graph_sum[c].max(0.0);
        }
        r[4 * EMBED_DIM..5 * EMBED_DIM].copy_from_slice(row(prev, v));
        r[5 * EMBED_DIM..6 * EMBED_DIM].copy_from_slice(row(h0, v));
    }
    let (out, tn) = run(&layer.node, &x)?;
    for (i, &v) in active.iter().enumerate() {
        next[v * EMBED_DIM..(v + 1) * EMBED_DIM].copy_from_slice(row(&out, i));
    }
    let tape = match (tp, ts, td, tn) {
        (Some(tp), Some(ts), Some(td), Some(tn)) => Some(LayerTape {
            active: active.to_vec(),
            graph_sum,
            pre_p,
            pre_s,
            pre_d,
            tapes: [tp, ts, td, tn],
        }),
        _ => None,
    };
    Ok((next, tape))
}

/// Reverse of one layer. Adds the `h^(0)` skip gradient into `d_h0` and
/// returns the gradient with respect to the previous layer's embeddings.
fn backward_layer(
    layer: &EmbeddingLayer,
    adj: &Adjacency,
    tape: &LayerTape,
    d_next: &[f64],
    d_h0: &mut [f64],
    grads: &mut [Vec<f64>],
) -> Result<Vec<f64>, NnError> {
    let n = adj.num_nodes();
    let mut d_prev = vec![0.0; n * EMBED_DIM];
    let na = tape.active.len();
    let mut d_out = vec![0.0; na * EMBED_DIM];
    for (i, &v) in tape.active.iter().enumerate() {
        d_out[i * EMBED_DIM..(i + 1) * EMBED_DIM].copy_from_slice(row(d_next, v));
    }
    let [tp, ts, td, tn] = &tape.tapes;
    let d_x = layer.node.backward(tn, &d_out, &mut grads[3])?;

    let mut d_p = vec![0.0; na * EMBED_DIM];
    let mut d_s = vec![0.0; na * EMBED_DIM];
    let mut d_d = vec![0.0; na * EMBED_DIM];
    let mut d_graph = [0.0; EMBED_DIM];
    for i in 0..na {
        let r = &d_x[i * NODE_INPUT..(i + 1) * NODE_INPUT];
        for c in 0..EMBED_DIM {
            let j = i * EMBED_DIM + c;
            if tape.pre_p[j] > 0.0 {
                d_p[j] = r[c];
            }
            if tape.pre_s[j] > 0.0 {
                d_s[j] = r[EMBED_DIM + c];
            }
            if tape.pre_d[j] > 0.0 {
                d_d[j] = r[2 * EMBED_DIM + c];
            }
            if tape.graph_sum[c] > 0.0 {
                d_graph[c] += r[3 * EMBED_DIM + c];
            }
        }
    }
    let d_p_in = layer.precedent.backward(tp, &d_p, &mut grads[0])?;
    let d_s_in = layer.succedent.backward(ts, &d_s, &mut grads[1])?;
    let d_d_in = layer.disjunctive.backward(td, &d_d, &mut grads[2])?;

    let mut d_groups = vec![[0.0; EMBED_DIM]; adj.groups.len()];
    for (i, &v) in tape.active.iter().enumerate() {
        let r = &d_x[i * NODE_INPUT..(i + 1) * NODE_INPUT];
        add_row(&mut d_prev, v, &r[4 * EMBED_DIM..5 * EMBED_DIM]);
        add_row(d_h0, v, &r[5 * EMBED_DIM..6 * EMBED_DIM]);
        if let Some(u) = adj.predecessor[v] {
            add_row(&mut d_prev, u, row(&d_p_in, i));
        }
        if let Some(u) = adj.successor[v] {
            add_row(&mut d_prev, u, row(&d_s_in, i));
        }
        if let Some(g) = adj.group_of[v] {
            let dd = row(&d_d_in, i);
            for (a, b) in d_groups[g].iter_mut().zip(dd) {
                *a += b;
            }
            for (a, b) in d_prev[v * EMBED_DIM..(v + 1) * EMBED_DIM].iter_mut().zip(dd) {
                *a -= b;
            }
        }
    }
    for (g, members) in adj.groups.iter().enumerate() {
        for &u in members {
            add_row(&mut d_prev, u, &d_groups[g]);
        }
    }
    for v in 0..n {
        add_row(&mut d_prev, v, &d_graph);
    }
    Ok(d_prev)
}
