//! Actor and critic over the graph embedding.
//!
//! The actor scores each candidate operation with `f_l(h_v^(K))` and
//! normalizes with a softmax over the candidates only. The critic maps the
//! summed final-layer embedding to a scalar state value.

use alloc::vec;
use alloc::vec::Vec;

use alloc::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gnn::{Adjacency, GnnStack, GnnTape, GraphInput, EMBED_DIM};
use crate::instance::JsspInstance;
use crate::math;
use crate::nn::{self, Mlp, NnError, Tape, DEFAULT_HIDDEN};
use crate::simulator::{
    node_features, run_episode, CompletionMode, EpisodeOutcome, GraphState, OpStatus, SimConfig, SimError, FEAT_PROCESSING_TIME, FEAT_REMAINING,
    FEAT_SUCCEEDING, FEAT_WAITING,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error("no candidate operations")]
    EmptyCandidates,
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Architecture and observation settings stored alongside the weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden: usize,
    pub depth: usize,
    pub shared_layers: bool,
    pub completion: CompletionMode,
    /// Divide time-valued features by the instance's largest processing
    /// time and the succeeding-operation count by the number of machines.
    pub normalize_features: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: DEFAULT_HIDDEN,
            depth: 3,
            shared_layers: false,
            completion: CompletionMode::Cumulative,
            normalize_features: true,
        }
    }
}

/// All learnable weights: the embedding stack, the actor head and the critic head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub config: ModelConfig,
    pub gnn: GnnStack,
    pub actor: Mlp,
    pub critic: Mlp,
}

fn split_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl ParameterSet {
    pub fn new(config: ModelConfig, seed: u64) -> Self {
        ParameterSet {
            config,
            gnn: GnnStack::new(config.depth, config.hidden, config.shared_layers, split_seed(seed, 1)),
            actor: Mlp::with_hidden(EMBED_DIM, config.hidden, 1, split_seed(seed, 2)),
            critic: Mlp::with_hidden(EMBED_DIM, config.hidden, 1, split_seed(seed, 3)),
        }
    }

    /// Every MLP in canonical order: embedding layers (`f_p, f_s, f_d, f_n`
    /// per layer), then actor, then critic.
    pub fn mlps(&self) -> impl Iterator<Item = &Mlp> {
        self.gnn.mlps().chain([&self.actor, &self.critic])
    }

    pub fn mlps_mut(&mut self) -> impl Iterator<Item = &mut Mlp> {
        self.gnn.mlps_mut().chain([&mut self.actor, &mut self.critic])
    }

    pub fn num_params(&self) -> usize {
        self.mlps().map(Mlp::num_params).sum()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients { tensors: self.mlps().map(|m| vec![0.0; m.num_params()]).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.mlps().all(|m| m.params().iter().all(|p| p.is_finite()))
    }
}

/// One flat gradient vector per MLP, aligned with [`ParameterSet::mlps`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for x in self.tensors.iter_mut().flatten() {
            *x *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|x| x.is_finite())
    }

    pub fn l2_norm(&self) -> f64 {
        math::sqrt(self.tensors.iter().flatten().map(|x| x * x).sum())
    }
}

/// Builds the embedding-stack input for a state: node features (optionally
/// normalized), the static adjacency and the live-node mask.
pub fn encode_state(state: &GraphState, config: &ModelConfig) -> GraphInput {
    let feats = node_features(state, config.completion);
    let inst = state.instance();
    let time_scale = 1.0 / inst.max_processing_time().max(1) as f64;
    let count_scale = 1.0 / inst.num_machines as f64;
    let mut features = Vec::with_capacity(feats.rows.len() * EMBED_DIM);
    for mut r in feats.rows {
        if config.normalize_features {
            r[FEAT_PROCESSING_TIME] *= time_scale;
            r[FEAT_WAITING] *= time_scale;
            // the -1 sentinel is kept as is
            if r[FEAT_REMAINING] >= 0.0 {
                r[FEAT_REMAINING] *= time_scale;
            }
            r[FEAT_SUCCEEDING] *= count_scale;
        }
        features.extend_from_slice(&r);
    }
    GraphInput {
        adjacency: Adjacency::from_graph(state.graph()),
        features,
        active: state.statuses().iter().map(|&s| s != OpStatus::Done).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub candidates: Vec<usize>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub value: f64,
}

impl PolicyOutput {
    /// `-sum p log p` over the candidates.
    pub fn entropy(&self) -> f64 {
        entropy(&self.probs, &self.log_probs)
    }

    pub fn index_of(&self, op: usize) -> Option<usize> {
        self.candidates.iter().position(|&c| c == op)
    }
}

pub fn entropy(probs: &[f64], log_probs: &[f64]) -> f64 {
    -probs.iter().zip(log_probs).filter(|(p, _)| **p > 0.0).map(|(p, l)| p * l).sum::<f64>()
}

/// Recorded forward pass of [`policy_with_tape`].
#[derive(Debug, Clone)]
pub struct PolicyTape {
    gnn: GnnTape,
    num_nodes: usize,
    candidates: Vec<usize>,
    actor: Tape,
    critic: Tape,
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + math::ln(logits.iter().map(|l| math::exp(l - max)).sum::<f64>());
    logits.iter().map(|l| l - lse).collect()
}

fn heads_input(embedding: &[f64], candidates: &[usize]) -> Vec<f64> {
    let mut x = Vec::with_capacity(candidates.len() * EMBED_DIM);
    for &c in candidates {
        x.extend_from_slice(&embedding[c * EMBED_DIM..(c + 1) * EMBED_DIM]);
    }
    x
}

fn finish_output(candidates: &[usize], logits: Vec<f64>, value: f64) -> Result<PolicyOutput, AgentError> {
    let probs = nn::masked_softmax(&logits, &vec![true; logits.len()])?;
    let log_probs = log_softmax(&logits);
    Ok(PolicyOutput { candidates: candidates.to_vec(), logits, probs, log_probs, value })
}

/// Action distribution over `candidates` and the state value.
pub fn policy(params: &ParameterSet, state: &GraphState, candidates: &[usize]) -> Result<PolicyOutput, AgentError> {
    policy_on_input(params, &encode_state(state, &params.config), candidates)
}

pub fn policy_on_input(
    params: &ParameterSet,
    input: &GraphInput,
    candidates: &[usize],
) -> Result<PolicyOutput, AgentError> {
    if candidates.is_empty() {
        return Err(AgentError::EmptyCandidates);
    }
    let emb = params.gnn.embed(input)?;
    let logits = params.actor.forward(&heads_input(emb.last(), candidates), candidates.len())?;
    let value = params.critic.forward(&emb.graph_embedding, 1)?[0];
    finish_output(candidates, logits, value)
}

/// Like [`policy`] but keeps a tape for [`policy_backward`].
pub fn policy_with_tape(
    params: &ParameterSet,
    input: &GraphInput,
    candidates: &[usize],
) -> Result<(PolicyOutput, PolicyTape), AgentError> {
    if candidates.is_empty() {
        return Err(AgentError::EmptyCandidates);
    }
    let (emb, gnn_tape) = params.gnn.embed_tape(input)?;
    let (logits, actor_tape) = params.actor.forward_tape(&heads_input(emb.last(), candidates), candidates.len())?;
    let (value, critic_tape) = params.critic.forward_tape(&emb.graph_embedding, 1)?;
    let out = finish_output(candidates, logits, value[0])?;
    let tape = PolicyTape {
        gnn: gnn_tape,
        num_nodes: input.adjacency.num_nodes(),
        candidates: candidates.to_vec(),
        actor: actor_tape,
        critic: critic_tape,
    };
    Ok((out, tape))
}

/// Back-propagates `dL/dlogits` (per candidate) and `dL/dvalue` through
/// the heads and the embedding stack, adding into `grads`. Returns
/// `dL/d(node features)`.
pub fn policy_backward(
    params: &ParameterSet,
    tape: &PolicyTape,
    d_logits: &[f64],
    d_value: f64,
    grads: &mut Gradients,
) -> Result<Vec<f64>, AgentError> {
    let n_gnn = params.gnn.num_mlps();
    let (gnn_grads, head_grads) = grads.tensors.split_at_mut(n_gnn);
    let d_cand = params.actor.backward(&tape.actor, d_logits, &mut head_grads[0])?;
    let d_graph_vec = params.critic.backward(&tape.critic, &[d_value], &mut head_grads[1])?;
    let mut d_final = vec![0.0; tape.num_nodes * EMBED_DIM];
    for (i, &c) in tape.candidates.iter().enumerate() {
        for k in 0..EMBED_DIM {
            d_final[c * EMBED_DIM + k] += d_cand[i * EMBED_DIM + k];
        }
    }
    let mut d_graph = [0.0; EMBED_DIM];
    d_graph.copy_from_slice(&d_graph_vec);
    Ok(params.gnn.backward(&tape.gnn, &d_final, &d_graph, gnn_grads)?)
}

/// Draws a candidate; returns `(op, log probability)`.
pub fn sample_action(output: &PolicyOutput, rng: &mut impl Rng) -> (usize, f64) {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let last = output.probs.len() - 1;
    for (i, p) in output.probs.iter().enumerate() {
        acc += p;
        if u < acc || i == last {
            return (output.candidates[i], output.log_probs[i]);
        }
    }
    unreachable!("probabilities are nonempty")
}

/// Most probable candidate; ties go to the lowest `(job, step)`.
pub fn greedy_action(output: &PolicyOutput) -> (usize, f64) {
    let mut best = 0;
    for i in 1..output.probs.len() {
        let better = output.probs[i] > output.probs[best]
            || (output.probs[i] == output.probs[best] && output.candidates[i] < output.candidates[best]);
        if better {
            best = i;
        }
    }
    (output.candidates[best], output.log_probs[best])
}

/// How the agent picks among candidates outside training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    #[default]
    Sample,
    Greedy,
}

/// Runs one episode with the agent choosing at every decision point. The
/// same `seed` drives the machine tie-breaks and the action draws.
pub fn run_agent(
    params: &ParameterSet,
    instance: Arc<JsspInstance>,
    seed: u64,
    mode: DecodeMode,
) -> Result<EpisodeOutcome, AgentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, 4));
    run_episode(instance, SimConfig::default(), seed, |state, d| {
        let out = policy(params, state, &d.candidates)?;
        Ok(match mode {
            DecodeMode::Sample => sample_action(&out, &mut rng).0,
            DecodeMode::Greedy => greedy_action(&out).0,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ModelConfig {
        ModelConfig { hidden: 16, ..ModelConfig::default() }
    }

    fn output(probs: Vec<f64>) -> PolicyOutput {
        let log_probs = probs.iter().map(|p| math::ln(*p)).collect();
        PolicyOutput {
            candidates: (0..probs.len()).map(|i| 10 + i).collect(),
            logits: vec![0.0; probs.len()],
            probs,
            log_probs,
            value: 0.0,
        }
    }

    #[test]
    fn single_candidate_has_probability_one() {
        let inst = JsspInstance::from_routes(2, &[vec![(0, 3), (1, 2)], vec![(1, 4), (0, 6)]], None).unwrap();
        let state = GraphState::new(Arc::new(inst));
        let params = ParameterSet::new(small_config(), 1);
        let out = policy(&params, &state, &[2]).unwrap();
        assert_eq!(out.probs, vec![1.0]);
        assert_eq!(out.log_probs, vec![0.0]);
        assert_eq!(out.entropy(), 0.0);
    }

    #[test]
    fn empty_candidates_rejected() {
        let inst = JsspInstance::from_routes(1, &[vec![(0, 3)]], None).unwrap();
        let state = GraphState::new(Arc::new(inst));
        let params = ParameterSet::new(small_config(), 1);
        assert_eq!(policy(&params, &state, &[]), Err(AgentError::EmptyCandidates));
    }

    #[test]
    fn identical_embeddings_split_evenly() {
        // Two jobs with identical routes and times are symmetric.
        let inst = JsspInstance::from_routes(1, &[vec![(0, 5)], vec![(0, 5)]], None).unwrap();
        let state = GraphState::new(Arc::new(inst));
        let params = ParameterSet::new(small_config(), 4);
        let out = policy(&params, &state, &[0, 1]).unwrap();
        assert_eq!(out.probs, vec![0.5, 0.5]);
    }

    #[test]
    fn sampling_is_reproducible_and_degenerate_when_certain() {
        let certain = output(vec![1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_action(&certain, &mut rng), (10, 0.0));
        let fair = output(vec![0.5, 0.5]);
        let draw = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            (0..20).map(|_| sample_action(&fair, &mut r).0).collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
    }

    #[test]
    fn fair_coin_frequencies() {
        let fair = output(vec![0.5, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10_000;
        let first = (0..n).filter(|_| sample_action(&fair, &mut rng).0 == 10).count() as f64;
        let sigma = (n as f64 * 0.25f64).sqrt();
        assert!((first - n as f64 * 0.5).abs() < 3.0 * sigma);
    }

    #[test]
    fn greedy_cases() {
        assert_eq!(greedy_action(&output(vec![0.9, 0.1])).0, 10);
        assert_eq!(greedy_action(&output(vec![0.5, 0.5])).0, 10);
        assert_eq!(greedy_action(&output(vec![1.0])).0, 10);
        assert_eq!(greedy_action(&output(vec![0.2, 0.8])).0, 11);
    }

    #[test]
    fn parameter_count_of_default_model() {
        let params = ParameterSet::new(ModelConfig::default(), 0);
        let small = 8 * 256 + 256 + 256 * 256 + 256 + 256 * 8 + 8;
        let node = 48 * 256 + 256 + 256 * 256 + 256 + 256 * 8 + 8;
        let head = 8 * 256 + 256 + 256 * 256 + 256 + 256 + 1;
        assert_eq!(params.num_params(), 3 * (3 * small + node) + 2 * head);
    }
}
