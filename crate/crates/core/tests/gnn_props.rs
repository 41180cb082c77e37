use std::sync::Arc;

use jssp_core::agent::{encode_state, ModelConfig};
use jssp_core::gnn::{Adjacency, GnnStack, GraphInput, EMBED_DIM};
use jssp_core::instance::{generate_uniform_benchmark, Interval};
use jssp_core::simulator::{JobShopEnv, NextDecision, SimConfig};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HIDDEN: usize = 32;
/// Rows of the node network's first weight matrix that read the graph sum.
const GRAPH_SUM_SLOT: std::ops::Range<usize> = 3 * EMBED_DIM..4 * EMBED_DIM;

/// A mid-episode input: random decisions for a random number of steps.
fn midway_input(seed: u64, m: usize, n: usize) -> GraphInput {
    let inst = Arc::new(generate_uniform_benchmark(seed, m, n, Interval::new(1, 30)).unwrap());
    let mut env = JobShopEnv::reset(inst, SimConfig::default(), seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stop = rng.gen_range(0..=m * n / 2);
    for _ in 0..stop {
        let NextDecision::Decision(d) = env.next_decision() else { break };
        env.step(*d.candidates.choose(&mut rng).unwrap()).unwrap();
    }
    encode_state(env.state(), &ModelConfig::default())
}

/// Relabels node `v` as `perm[v]`.
fn permute(input: &GraphInput, perm: &[usize], rng: &mut impl Rng) -> GraphInput {
    let n = perm.len();
    let a = &input.adjacency;
    let mut adj = Adjacency::isolated(n);
    for v in 0..n {
        adj.predecessor[perm[v]] = a.predecessor[v].map(|u| perm[u]);
        adj.successor[perm[v]] = a.successor[v].map(|u| perm[u]);
    }
    let mut groups: Vec<Vec<usize>> =
        a.groups.iter().map(|g| g.iter().map(|&v| perm[v]).collect()).collect();
    groups.shuffle(rng);
    for (gi, g) in groups.iter().enumerate() {
        for &v in g {
            adj.group_of[v] = Some(gi);
        }
    }
    adj.groups = groups;
    let mut features = vec![0.0; input.features.len()];
    let mut active = vec![false; n];
    for v in 0..n {
        features[perm[v] * EMBED_DIM..(perm[v] + 1) * EMBED_DIM]
            .copy_from_slice(&input.features[v * EMBED_DIM..(v + 1) * EMBED_DIM]);
        active[perm[v]] = input.active[v];
    }
    GraphInput { adjacency: adj, features, active }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn permutation_equivariance(seed in any::<u64>(), m in 1usize..=4, n in 1usize..=4) {
        let input = midway_input(seed, m, n);
        let stack = GnnStack::new(3, HIDDEN, false, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let mut perm: Vec<usize> = (0..m * n).collect();
        perm.shuffle(&mut rng);
        let permuted = permute(&input, &perm, &mut rng);
        let e = stack.embed(&input).unwrap();
        let ep = stack.embed(&permuted).unwrap();
        for (k, (h, hp)) in e.layers.iter().zip(&ep.layers).enumerate() {
            for v in 0..m * n {
                for d in 0..EMBED_DIM {
                    let (x, y) = (h[v * EMBED_DIM + d], hp[perm[v] * EMBED_DIM + d]);
                    prop_assert!(close(x, y), "depth {k} node {v} dim {d}: {x} vs {y}");
                }
            }
        }
        for d in 0..EMBED_DIM {
            prop_assert!(close(e.graph_embedding[d], ep.graph_embedding[d]));
        }
    }

    #[test]
    fn finished_nodes_are_zero_and_get_no_gradient(seed in any::<u64>(), m in 2usize..=4, n in 2usize..=4) {
        let input = midway_input(seed, m, n);
        let stack = GnnStack::new(3, HIDDEN, false, seed);
        let (e, tape) = stack.embed_tape(&input).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d_last: Vec<f64> = (0..m * n * EMBED_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d_graph: [f64; EMBED_DIM] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let mut grads: Vec<Vec<f64>> = stack.mlps().map(|m| vec![0.0; m.num_params()]).collect();
        let d_features = stack.backward(&tape, &d_last, &d_graph, &mut grads).unwrap();
        for v in (0..m * n).filter(|&v| !input.active[v]) {
            let row = v * EMBED_DIM..(v + 1) * EMBED_DIM;
            for h in &e.layers {
                prop_assert!(h[row.clone()].iter().all(|&x| x == 0.0));
            }
            prop_assert!(d_features[row].iter().all(|&x| x == 0.0));
        }
    }
}

/// A path `0 - 1 - ... - (len-1)` of precedence arcs, no machine groups.
fn path(len: usize, rng: &mut impl Rng) -> GraphInput {
    let mut adj = Adjacency::isolated(len);
    for v in 1..len {
        adj.predecessor[v] = Some(v - 1);
        adj.successor[v - 1] = Some(v);
    }
    GraphInput {
        adjacency: adj,
        features: (0..len * EMBED_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        active: vec![true; len],
    }
}

fn without_graph_sum(stack: &GnnStack) -> GnnStack {
    let mut s = stack.clone();
    for layer in s.layers_mut() {
        let h = layer.node.hidden();
        layer.node.params_mut()[GRAPH_SUM_SLOT.start * h..GRAPH_SUM_SLOT.end * h].fill(0.0);
    }
    s
}

#[test]
fn receptive_field_is_k_hops_apart_from_the_graph_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let depth = 3;
    let base = path(7, &mut rng);
    let full = GnnStack::new(depth, HIDDEN, false, 5);
    let local = without_graph_sum(&full);
    for far in 0..7usize {
        let mut changed = base.clone();
        for x in &mut changed.features[far * EMBED_DIM..(far + 1) * EMBED_DIM] {
            *x += 0.5;
        }
        let hops = far;
        let before = local.embed(&base).unwrap();
        let after = local.embed(&changed).unwrap();
        let same = before.node(0) == after.node(0);
        assert_eq!(same, hops > depth, "node {far} at {hops} hops");
        // With the graph sum in place, distant nodes still reach node 0.
        let before = full.embed(&base).unwrap();
        let after = full.embed(&changed).unwrap();
        assert_ne!(before.node(0), after.node(0), "node {far}");
    }
}

#[test]
fn isolated_nodes_see_only_themselves_and_the_sum() {
    // One layer, no arcs: swapping two nodes' features swaps their outputs.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let stack = GnnStack::new(1, HIDDEN, false, 9);
    let feats: Vec<f64> = (0..2 * EMBED_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let input = GraphInput { adjacency: Adjacency::isolated(2), features: feats.clone(), active: vec![true; 2] };
    let mut swapped = input.clone();
    swapped.features[..EMBED_DIM].copy_from_slice(&feats[EMBED_DIM..]);
    swapped.features[EMBED_DIM..].copy_from_slice(&feats[..EMBED_DIM]);
    let a = stack.embed(&input).unwrap();
    let b = stack.embed(&swapped).unwrap();
    assert_eq!(a.node(0), b.node(1));
    assert_eq!(a.node(1), b.node(0));
}
