//! Proximal policy optimization for the dispatching agent.
//!
//! One update collects an episode on each of `n` training instances,
//! computes advantages by generalized advantage estimation, then runs a few
//! epochs of Adam ascent on the clipped surrogate plus value and entropy
//! terms. The training instances are redrawn every `regenerate_every`
//! updates.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{
    encode_state, policy_backward, policy_on_input, policy_with_tape, run_agent, sample_action, AgentError,
    DecodeMode, Gradients, ModelConfig, ParameterSet,
};
use crate::gnn::GraphInput;
use crate::instance::{generate_training, GeneratorConfig, InstanceError, JsspInstance, Time};
use crate::math;
use crate::metrics::{self, relative_error, MetricError};
use crate::nn::{adam_step, AdamConfig, AdamState};
use crate::simulator::{JobShopEnv, NextDecision, SimConfig, SimError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PpoError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("validation instance {0} has no reference makespan")]
    MissingOptimum(usize),
    #[error("non-finite loss at update {update}: {detail}")]
    NonFiniteLoss { update: usize, detail: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub learning_rate: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub episodes_per_update: usize,
    pub regenerate_every: usize,
    pub epochs_per_update: usize,
    /// Each epoch splits the shuffled samples of the update into this many
    /// minibatches, one Adam step each; 1 means one full-batch step.
    pub minibatches: usize,
    /// Rescale the gradient to at most this global L2 norm before each step.
    pub max_grad_norm: Option<f64>,
    pub max_updates: usize,
    pub normalize_advantages: bool,
    /// Divide rewards by the instance's largest processing time.
    pub normalize_rewards: bool,
    /// Validate every this many updates; 0 disables validation.
    pub validate_every: usize,
    pub convergence_window: usize,
    pub convergence_tolerance: f64,
    pub eval_mode: DecodeMode,
    pub generator: GeneratorConfig,
    pub model: ModelConfig,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            learning_rate: 2.5e-4,
            gamma: 1.0,
            gae_lambda: 0.95,
            clip: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.01,
            episodes_per_update: 20,
            regenerate_every: 5,
            epochs_per_update: 4,
            minibatches: 4,
            max_grad_norm: Some(0.5),
            max_updates: 1000,
            normalize_advantages: true,
            normalize_rewards: true,
            validate_every: 1,
            convergence_window: 10,
            convergence_tolerance: 1e-3,
            eval_mode: DecodeMode::Sample,
            generator: GeneratorConfig::default(),
            model: ModelConfig::default(),
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), PpoError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(PpoError::InvalidConfig("gamma must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(PpoError::InvalidConfig("gae_lambda must lie in [0, 1]"));
        }
        if !(self.clip > 0.0) {
            return Err(PpoError::InvalidConfig("clip must be positive"));
        }
        if self.episodes_per_update == 0
            || self.regenerate_every == 0
            || self.epochs_per_update == 0
            || self.minibatches == 0
        {
            return Err(PpoError::InvalidConfig("episode, regeneration, epoch and minibatch counts must be positive"));
        }
        if self.max_grad_norm.is_some_and(|n| !(n > 0.0)) {
            return Err(PpoError::InvalidConfig("max_grad_norm must be positive"));
        }
        self.generator.validate()?;
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, ..AdamConfig::default() }
    }
}

/// One decision of a collected episode.
#[derive(Debug, Clone)]
pub struct Step {
    pub input: GraphInput,
    pub candidates: Vec<usize>,
    /// Index of the chosen operation within `candidates`.
    pub action: usize,
    pub old_log_prob: f64,
    pub old_value: f64,
    /// Aggregated reward of the transition, after any normalization.
    pub reward: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub advantages: Vec<f64>,
    pub targets: Vec<f64>,
    pub makespan: Time,
    /// Undiscounted episode return, including reward never attached to a step.
    pub total_reward: f64,
}

impl Trajectory {
    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.old_value).collect()
    }
}

/// Samples one episode from the current policy.
pub fn collect_episode(
    instance: Arc<JsspInstance>,
    params: &ParameterSet,
    config: &PpoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory, PpoError> {
    let scale = if config.normalize_rewards { 1.0 / instance.max_processing_time().max(1) as f64 } else { 1.0 };
    let mut env = JobShopEnv::reset(instance, SimConfig { gamma: config.gamma }, rng.gen());
    let mut steps = Vec::new();
    let mut total_reward = 0.0;
    while let NextDecision::Decision(d) = env.next_decision() {
        let input = encode_state(env.state(), &params.config);
        let out = policy_on_input(params, &input, &d.candidates)?;
        let (op, log_prob) = sample_action(&out, rng);
        let sample = env.step(op)?;
        total_reward += sample.reward;
        steps.push(Step {
            input,
            action: out.index_of(op).expect("sampled from candidates"),
            candidates: d.candidates,
            old_log_prob: log_prob,
            old_value: out.value,
            reward: sample.reward * scale,
        });
    }
    total_reward += env.unattributed_reward();
    let makespan = env.state().makespan()?;
    Ok(Trajectory { steps, advantages: Vec::new(), targets: Vec::new(), makespan, total_reward })
}

/// Reverse recursion `A_t = delta_t + gamma lambda A_{t+1}` with a zero
/// value after the last step.
pub fn compute_gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let t = rewards.len();
    let mut adv = vec![0.0; t];
    let mut next_adv = 0.0;
    for i in (0..t).rev() {
        let next_value = if i + 1 < t { values[i + 1] } else { 0.0 };
        let delta = rewards[i] + gamma * next_value - values[i];
        next_adv = delta + gamma * lambda * next_adv;
        adv[i] = next_adv;
    }
    adv
}

/// Discounted reward-to-go.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for i in (0..rewards.len()).rev() {
        acc = rewards[i] + gamma * acc;
        out[i] = acc;
    }
    out
}

/// Fills advantages and value targets.
pub fn finish_trajectory(traj: &mut Trajectory, gamma: f64, lambda: f64) {
    let rewards = traj.rewards();
    traj.advantages = compute_gae(&rewards, &traj.values(), gamma, lambda);
    traj.targets = discounted_returns(&rewards, gamma);
}

/// `min(r A, clip(r, 1 - eps, 1 + eps) A)` and its derivative in `r`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> (f64, f64) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * advantage;
    if unclipped <= clipped {
        (unclipped, advantage)
    } else {
        (clipped, 0.0)
    }
}

/// A training sample with its advantage and value target.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub step: &'a Step,
    pub advantage: f64,
    pub target: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ObjectiveParts {
    pub total: f64,
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

/// Mean over `batch` of `L_clip - alpha (V - V_targ)^2 + beta S`, and its
/// gradient for ascent.
pub fn ppo_objective(
    params: &ParameterSet,
    batch: &[Sample<'_>],
    config: &PpoConfig,
) -> Result<(ObjectiveParts, Gradients), PpoError> {
    let mut grads = params.zero_gradients();
    let mut parts = ObjectiveParts::default();
    if batch.is_empty() {
        return Ok((parts, grads));
    }
    let inv = 1.0 / batch.len() as f64;
    for s in batch {
        let (out, tape) = policy_with_tape(params, &s.step.input, &s.step.candidates)?;
        let a = s.step.action;
        let ratio = math::exp(out.log_probs[a] - s.step.old_log_prob);
        let (surr, d_ratio) = clipped_surrogate(ratio, s.advantage, config.clip);
        let ent = out.entropy();
        let verr = out.value - s.target;
        parts.surrogate += surr * inv;
        parts.value_loss += verr * verr * inv;
        parts.entropy += ent * inv;

        // d log p_a / d z_j = [j == a] - p_j; d S / d z_j = -p_j (log p_j + S).
        let d_logp = d_ratio * ratio;
        let d_logits: Vec<f64> = out
            .probs
            .iter()
            .zip(&out.log_probs)
            .enumerate()
            .map(|(j, (&p, &lp))| {
                let ind = if j == a { 1.0 } else { 0.0 };
                let d_ent = if p > 0.0 { -p * (lp + ent) } else { 0.0 };
                inv * (d_logp * (ind - p) + config.entropy_coef * d_ent)
            })
            .collect();
        let d_value = -2.0 * config.value_coef * verr * inv;
        policy_backward(params, &tape, &d_logits, d_value, &mut grads)?;
    }
    parts.total = parts.surrogate - config.value_coef * parts.value_loss + config.entropy_coef * parts.entropy;
    Ok((parts, grads))
}

/// Stops once the tracked metric has gone `window` rounds without improving
/// on its best value by more than the relative tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDetector {
    pub window: usize,
    pub tolerance: f64,
    best: Option<f64>,
    stale: usize,
}

impl ConvergenceDetector {
    pub fn new(window: usize, tolerance: f64) -> Self {
        ConvergenceDetector { window, tolerance, best: None, stale: 0 }
    }

    /// Records a value where lower is better; returns whether to stop.
    pub fn observe(&mut self, value: f64) -> bool {
        match self.best {
            Some(b) if value >= b * (1.0 - self.tolerance) => self.stale += 1,
            _ => {
                self.best = Some(value);
                self.stale = 0;
            }
        }
        self.window > 0 && self.stale >= self.window
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }
}

/// Held-out instances with their reference makespans.
#[derive(Debug, Clone)]
pub struct ValidationSet {
    pub instances: Vec<Arc<JsspInstance>>,
    pub references: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub mean_error: f64,
    pub mean_makespan: f64,
}

/// Mean relative error of the agent against the references. Instance `i`
/// is rolled out with seed `seed + i`.
pub fn validate(
    params: &ParameterSet,
    set: &ValidationSet,
    seed: u64,
    mode: DecodeMode,
) -> Result<ValidationResult, PpoError> {
    let mut errors = Vec::with_capacity(set.instances.len());
    let mut makespans = Vec::with_capacity(set.instances.len());
    for (i, inst) in set.instances.iter().enumerate() {
        let reference = set.references.get(i).copied().flatten().ok_or(PpoError::MissingOptimum(i))?;
        let c = run_agent(params, inst.clone(), seed.wrapping_add(i as u64), mode)?.makespan();
        errors.push(relative_error(c, reference)?);
        makespans.push(c as f64);
    }
    Ok(ValidationResult { mean_error: metrics::mean(&errors), mean_makespan: metrics::mean(&makespans) })
}

/// Per-update training metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub update: usize,
    pub mean_return: f64,
    pub mean_makespan: f64,
    pub val_error: Option<f64>,
    pub wall_ms: u64,
}

/// Training loop state. `step` performs one update; callers decide when to
/// stop (see [`Trainer::converged`]) and may time each step.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: PpoConfig,
    pub params: ParameterSet,
    adam: Vec<AdamState>,
    rng: ChaCha8Rng,
    instances: Vec<Arc<JsspInstance>>,
    updates: usize,
    detector: ConvergenceDetector,
    converged: bool,
    validation_seed: u64,
    /// Lowest validation mean makespan so far and the parameters that had it.
    best: Option<(f64, ParameterSet)>,
}

impl Trainer {
    pub fn new(config: PpoConfig, seed: u64) -> Result<Self, PpoError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ParameterSet::new(config.model, rng.gen());
        let adam = params.mlps().map(|m| AdamState::new(m.num_params())).collect();
        let validation_seed = rng.gen();
        Ok(Trainer {
            detector: ConvergenceDetector::new(config.convergence_window, config.convergence_tolerance),
            config,
            params,
            adam,
            rng,
            instances: Vec::new(),
            updates: 0,
            converged: false,
            validation_seed,
            best: None,
        })
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn is_done(&self) -> bool {
        self.converged || self.updates >= self.config.max_updates
    }

    pub fn validation_seed(&self) -> u64 {
        self.validation_seed
    }

    /// Parameters of the validation round with the lowest mean makespan;
    /// the current parameters when no round has run.
    pub fn best_params(&self) -> &ParameterSet {
        self.best.as_ref().map_or(&self.params, |(_, p)| p)
    }

    pub fn best_validation_makespan(&self) -> Option<f64> {
        self.best.as_ref().map(|(m, _)| *m)
    }

    fn regenerate(&mut self) -> Result<(), PpoError> {
        let mut fresh = Vec::with_capacity(self.config.episodes_per_update);
        for _ in 0..self.config.episodes_per_update {
            let cfg = self.config.generator.with_seed(self.rng.gen());
            fresh.push(Arc::new(generate_training(&cfg)?));
        }
        self.instances = fresh;
        Ok(())
    }

    /// Collects the episodes of one update with advantages filled in.
    pub fn collect(&mut self) -> Result<Vec<Trajectory>, PpoError> {
        if self.updates % self.config.regenerate_every == 0 || self.instances.is_empty() {
            self.regenerate()?;
        }
        let mut out = Vec::with_capacity(self.instances.len());
        for inst in self.instances.clone() {
            let mut t = collect_episode(inst, &self.params, &self.config, &mut self.rng)?;
            finish_trajectory(&mut t, self.config.gamma, self.config.gae_lambda);
            out.push(t);
        }
        Ok(out)
    }

    /// Runs the optimization epochs on collected trajectories.
    pub fn optimize(&mut self, trajectories: &[Trajectory]) -> Result<ObjectiveParts, PpoError> {
        let mut samples: Vec<Sample<'_>> = trajectories
            .iter()
            .flat_map(|t| {
                t.steps
                    .iter()
                    .zip(&t.advantages)
                    .zip(&t.targets)
                    .map(|((step, &advantage), &target)| Sample { step, advantage, target })
            })
            .collect();
        if self.config.normalize_advantages && samples.len() > 1 {
            let adv: Vec<f64> = samples.iter().map(|s| s.advantage).collect();
            let (mu, sd) = (metrics::mean(&adv), metrics::std_dev(&adv));
            for s in &mut samples {
                s.advantage = (s.advantage - mu) / (sd + 1e-8);
            }
        }
        let mut last = ObjectiveParts::default();
        if samples.is_empty() {
            return Ok(last);
        }
        let batch = samples.len().div_ceil(self.config.minibatches.min(samples.len()));
        let adam_cfg = self.config.adam();
        for _ in 0..self.config.epochs_per_update {
            if batch < samples.len() {
                samples.shuffle(&mut self.rng);
            }
            for chunk in samples.chunks(batch) {
                let (parts, mut grads) = ppo_objective(&self.params, chunk, &self.config)?;
                if !parts.total.is_finite() || !grads.is_finite() {
                    return Err(PpoError::NonFiniteLoss {
                        update: self.updates,
                        detail: alloc::format!(
                            "objective {:?}, gradient norm {}, {} samples",
                            parts,
                            grads.l2_norm(),
                            chunk.len()
                        ),
                    });
                }
                if let Some(max) = self.config.max_grad_norm {
                    let norm = grads.l2_norm();
                    if norm > max {
                        grads.scale(max / norm);
                    }
                }
                for ((mlp, g), st) in self.params.mlps_mut().zip(&grads.tensors).zip(&mut self.adam) {
                    let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                    adam_step(mlp.params_mut(), &neg, st, &adam_cfg).map_err(AgentError::from)?;
                }
                last = parts;
            }
        }
        Ok(last)
    }

    /// One full update: collect, optimize, optionally validate.
    pub fn step(&mut self, validation: Option<&ValidationSet>) -> Result<UpdateRecord, PpoError> {
        let trajectories = self.collect()?;
        self.optimize(&trajectories)?;
        self.updates += 1;
        let k = trajectories.len().max(1) as f64;
        let mean_return = trajectories.iter().map(|t| t.total_reward).sum::<f64>() / k;
        let mean_makespan = trajectories.iter().map(|t| t.makespan as f64).sum::<f64>() / k;
        let mut val_error = None;
        if let Some(set) = validation {
            if self.config.validate_every > 0 && self.updates % self.config.validate_every == 0 {
                let v = validate(&self.params, set, self.validation_seed, self.config.eval_mode)?;
                val_error = Some(v.mean_error);
                if self.best.as_ref().is_none_or(|(m, _)| v.mean_makespan < *m) {
                    self.best = Some((v.mean_makespan, self.params.clone()));
                }
                if self.detector.observe(v.mean_makespan) {
                    self.converged = true;
                }
            }
        }
        Ok(UpdateRecord { update: self.updates, mean_return, mean_makespan, val_error, wall_ms: 0 })
    }
}

/// Trains until convergence or `max_updates`. Returns the parameters of the
/// best validation round (the final ones without validation) and one record
/// per update.
pub fn train(
    config: PpoConfig,
    seed: u64,
    validation: Option<&ValidationSet>,
) -> Result<(ParameterSet, Vec<UpdateRecord>), PpoError> {
    let mut trainer = Trainer::new(config, seed)?;
    let mut log = Vec::new();
    while !trainer.is_done() {
        log.push(trainer.step(validation)?);
    }
    Ok((trainer.best_params().clone(), log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Interval;

    #[test]
    fn gae_examples() {
        assert_eq!(compute_gae(&[-3.0], &[0.0], 1.0, 0.95), vec![-3.0]);
        let a = compute_gae(&[-1.0, -1.0], &[0.0, 0.0], 1.0, 0.95);
        assert!((a[0] + 1.95).abs() < 1e-12);
        assert_eq!(a[1], -1.0);
        let (r, v) = ([-2.0, 0.5, -1.0], [0.3, -0.7, 1.1]);
        let a = compute_gae(&r, &v, 0.9, 0.0);
        assert!((a[0] - (-2.0 + 0.9 * -0.7 - 0.3)).abs() < 1e-12);
        assert!((a[2] - (-1.0 - 1.1)).abs() < 1e-12);
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clipped_surrogate(1.5, 2.0, 0.2).0, 2.4);
        assert_eq!(clipped_surrogate(1.0, 2.0, 0.2), (2.0, 2.0));
        // Negative advantage keeps the unclipped (smaller) term above 1 + eps.
        assert_eq!(clipped_surrogate(1.5, -2.0, 0.2), (-3.0, -2.0));
        assert_eq!(clipped_surrogate(0.5, 2.0, 0.2), (1.0, 2.0));
        assert_eq!(clipped_surrogate(0.5, -2.0, 0.2).1, 0.0);
    }

    #[test]
    fn returns_sum_rewards() {
        assert_eq!(discounted_returns(&[-1.0, -2.0, -3.0], 1.0), vec![-6.0, -5.0, -3.0]);
    }

    #[test]
    fn detector_waits_a_full_window() {
        let mut d = ConvergenceDetector::new(3, 1e-3);
        assert!(!d.observe(100.0));
        assert!(!d.observe(99.95));
        assert!(!d.observe(99.0));
        assert!(!d.observe(99.0));
        assert!(!d.observe(98.99));
        assert!(d.observe(99.5));
    }

    #[test]
    fn trivial_episodes() {
        let params = ParameterSet::new(ModelConfig { hidden: 8, ..ModelConfig::default() }, 0);
        let cfg = PpoConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let one = Arc::new(JsspInstance::from_routes(1, &[vec![(0, 5)]], None).unwrap());
        let t = collect_episode(one, &params, &cfg, &mut rng).unwrap();
        assert!(t.steps.is_empty());
        assert_eq!(t.makespan, 5);
        let two = Arc::new(JsspInstance::from_routes(1, &[vec![(0, 3)], vec![(0, 4)]], None).unwrap());
        let t = collect_episode(two, &params, &cfg, &mut rng).unwrap();
        assert_eq!(t.steps.len(), 1);
        assert_eq!(t.makespan, 7);
    }

    #[test]
    fn zero_updates_returns_initialization() {
        let config = PpoConfig {
            max_updates: 0,
            model: ModelConfig { hidden: 8, ..ModelConfig::default() },
            generator: GeneratorConfig {
                machine_range: Interval::new(2, 2),
                job_range: Interval::new(2, 2),
                ..GeneratorConfig::default()
            },
            ..PpoConfig::default()
        };
        let (params, log) = train(config, 11, None).unwrap();
        assert!(log.is_empty());
        assert_eq!(params, Trainer::new(config, 11).unwrap().params);
    }

    #[test]
    fn best_params_follow_the_lowest_validation_makespan() {
        let generator = GeneratorConfig {
            machine_range: Interval::new(2, 3),
            job_range: Interval::new(2, 3),
            ..GeneratorConfig::default()
        };
        let config = PpoConfig {
            max_updates: 6,
            episodes_per_update: 3,
            convergence_window: 0,
            model: ModelConfig { hidden: 8, ..ModelConfig::default() },
            generator,
            ..PpoConfig::default()
        };
        let instances: Vec<_> =
            (0..4).map(|s| Arc::new(crate::instance::generate_training(&generator.with_seed(s)).unwrap())).collect();
        let set = ValidationSet { references: vec![Some(1.0); 4], instances };
        let mut t = Trainer::new(config, 3).unwrap();
        assert_eq!(t.best_params(), &t.params);
        let mut rounds = Vec::new();
        while !t.is_done() {
            t.step(Some(&set)).unwrap();
            let v = validate(&t.params, &set, t.validation_seed(), config.eval_mode).unwrap();
            rounds.push((v.mean_makespan, t.params.clone()));
        }
        let lowest = rounds.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
        let first = rounds.iter().find(|r| r.0 == lowest).unwrap();
        assert_eq!(t.best_validation_makespan(), Some(lowest));
        assert_eq!(t.best_params(), &first.1);
    }
}
