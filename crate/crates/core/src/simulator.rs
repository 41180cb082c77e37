//! Event-skipping job-shop environment over the disjunctive graph.
//!
//! Time advances in integer ticks. At every tick the environment first
//! completes finishing operations, then loads every free machine that has
//! exactly one ready operation. A free machine with two or more ready
//! operations is a decision point; only there is the caller asked to act.
//! Between decision points the environment jumps straight to the next
//! completion event, summing the per-tick reward `-(waiting jobs)` of the
//! skipped ticks into the pending reward of the next transition sample.
//!
//! A tick's waiting count is taken after every dispatch at that tick, so the
//! reward of tick `t` belongs to the transition that leaves time `t`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::instance::{JsspInstance, Time};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("machine {machine} is busy at t={time}")]
    MachineBusy { machine: usize, time: Time },
    #[error("operation {op} is not a candidate of the pending decision")]
    IllegalAction { op: usize },
    #[error("state is not terminal")]
    NotTerminal,
    #[error("episode already terminated")]
    Terminated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpStatus {
    NotScheduled,
    Processing,
    Done,
}

/// Static adjacency of the disjunctive graph. Conjunctive arcs link
/// consecutive steps of a job; disjunctive arcs link operations sharing a
/// machine, so `N_d(v)` is `v`'s machine group minus `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisjunctiveGraph {
    num_machines: usize,
    machine_of: Vec<usize>,
    machine_ops: Vec<Vec<usize>>,
}

impl DisjunctiveGraph {
    pub fn new(instance: &JsspInstance) -> Self {
        let mut machine_ops = vec![Vec::new(); instance.num_machines];
        let machine_of: Vec<usize> = instance.operations().map(|o| o.machine_id).collect();
        for (v, &k) in machine_of.iter().enumerate() {
            machine_ops[k].push(v);
        }
        DisjunctiveGraph { num_machines: instance.num_machines, machine_of, machine_ops }
    }

    pub fn num_nodes(&self) -> usize {
        self.machine_of.len()
    }

    #[inline]
    pub fn predecessor(&self, v: usize) -> Option<usize> {
        (v % self.num_machines != 0).then(|| v - 1)
    }

    #[inline]
    pub fn successor(&self, v: usize) -> Option<usize> {
        (v % self.num_machines != self.num_machines - 1).then(|| v + 1)
    }

    pub fn disjunctive_neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.machine_ops[self.machine_of[v]].iter().copied().filter(move |&u| u != v)
    }

    pub fn machine_of(&self, v: usize) -> usize {
        self.machine_of[v]
    }

    /// Operation ids per machine; each group is a clique of disjunctive arcs.
    pub fn machine_groups(&self) -> &[Vec<usize>] {
        &self.machine_ops
    }

    /// Number of unordered same-machine pairs.
    pub fn disjunctive_pair_count(&self) -> usize {
        self.machine_ops.iter().map(|g| g.len() * g.len().saturating_sub(1) / 2).sum()
    }
}

/// Snapshot of a job shop during scheduling.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphState {
    instance: Arc<JsspInstance>,
    graph: Arc<DisjunctiveGraph>,
    time: Time,
    status: Vec<OpStatus>,
    start: Vec<Option<Time>>,
    finish: Vec<Option<Time>>,
    machine_busy_until: Vec<Option<Time>>,
    ready_since: Vec<Option<Time>>,
    next_step: Vec<usize>,
    done: usize,
}

impl GraphState {
    /// The initial snapshot: nothing processed, every job's first operation
    /// ready at `t = 0`.
    pub fn new(instance: Arc<JsspInstance>) -> Self {
        let graph = Arc::new(DisjunctiveGraph::new(&instance));
        let n_ops = instance.num_operations();
        let mut ready_since = vec![None; n_ops];
        for j in 0..instance.num_jobs {
            ready_since[instance.op_id(j, 0)] = Some(0);
        }
        GraphState {
            time: 0,
            status: vec![OpStatus::NotScheduled; n_ops],
            start: vec![None; n_ops],
            finish: vec![None; n_ops],
            machine_busy_until: vec![None; instance.num_machines],
            ready_since,
            next_step: vec![0; instance.num_jobs],
            done: 0,
            graph,
            instance,
        }
    }

    pub fn instance(&self) -> &JsspInstance {
        &self.instance
    }

    pub fn instance_arc(&self) -> &Arc<JsspInstance> {
        &self.instance
    }

    pub fn graph(&self) -> &DisjunctiveGraph {
        &self.graph
    }

    pub fn time(&self) -> Time {
        self.time
    }

    pub fn num_nodes(&self) -> usize {
        self.status.len()
    }

    pub fn status(&self, op: usize) -> OpStatus {
        self.status[op]
    }

    pub fn statuses(&self) -> &[OpStatus] {
        &self.status
    }

    pub fn start_time(&self, op: usize) -> Option<Time> {
        self.start[op]
    }

    pub fn finish_time(&self, op: usize) -> Option<Time> {
        self.finish[op]
    }

    pub fn ready_since(&self, op: usize) -> Option<Time> {
        self.ready_since[op]
    }

    pub fn machine_busy_until(&self, machine: usize) -> Option<Time> {
        self.machine_busy_until[machine]
    }

    /// Index of the first not-yet-started step of `job` (`m` once all started).
    pub fn next_step(&self, job: usize) -> usize {
        self.next_step[job]
    }

    pub fn is_terminal(&self) -> bool {
        self.done == self.status.len()
    }

    pub fn is_machine_free(&self, machine: usize) -> bool {
        self.machine_busy_until[machine].is_none()
    }

    /// Not scheduled and its predecessor (if any) is done.
    pub fn is_ready(&self, op: usize) -> bool {
        self.status[op] == OpStatus::NotScheduled
            && self.graph.predecessor(op).is_none_or(|p| self.status[p] == OpStatus::Done)
    }

    /// Ready operations routed to `machine`, in ascending id order.
    pub fn dispatchable_ops(&self, machine: usize) -> Result<Vec<usize>, SimError> {
        if !self.is_machine_free(machine) {
            return Err(SimError::MachineBusy { machine, time: self.time });
        }
        Ok(self.ready_ops_on(machine))
    }

    fn ready_ops_on(&self, machine: usize) -> Vec<usize> {
        self.graph.machine_ops[machine].iter().copied().filter(|&v| self.is_ready(v)).collect()
    }

    /// Ready operations grouped by machine, one pass over the jobs.
    fn ready_by_machine(&self) -> Vec<Vec<usize>> {
        let m = self.instance.num_machines;
        let mut out = vec![Vec::new(); m];
        for j in 0..self.instance.num_jobs {
            let s = self.next_step[j];
            if s < m {
                let op = self.instance.op_id(j, s);
                if self.is_ready(op) {
                    out[self.graph.machine_of(op)].push(op);
                }
            }
        }
        out
    }

    /// Jobs that are unfinished and not currently processing; their next
    /// operation is ready but unserved.
    pub fn waiting_job_count(&self) -> usize {
        let m = self.instance.num_machines;
        (0..self.instance.num_jobs)
            .filter(|&j| {
                let s = self.next_step[j];
                s < m && self.is_ready(self.instance.op_id(j, s))
            })
            .count()
    }

    /// Makespan of a terminal state.
    pub fn makespan(&self) -> Result<Time, SimError> {
        if !self.is_terminal() {
            return Err(SimError::NotTerminal);
        }
        Ok(self.finish.iter().map(|f| f.unwrap_or(0)).max().unwrap_or(0))
    }

    /// Started operations as schedule rows.
    pub fn schedule(&self) -> Schedule {
        let rows = self
            .instance
            .operations()
            .enumerate()
            .filter_map(|(v, op)| {
                Some(ScheduledOp {
                    job: op.job_id,
                    step: op.step_index,
                    machine: op.machine_id,
                    start: self.start[v]?,
                    finish: self.finish[v]?,
                })
            })
            .collect();
        Schedule { rows }
    }

    fn start_op(&mut self, op: usize) {
        debug_assert!(self.is_ready(op));
        let machine = self.graph.machine_of(op);
        debug_assert!(self.is_machine_free(machine));
        let p = self.instance.operation(op).processing_time;
        let finish = self.time + p;
        self.status[op] = OpStatus::Processing;
        self.start[op] = Some(self.time);
        self.finish[op] = Some(finish);
        self.machine_busy_until[machine] = Some(finish);
        self.next_step[op / self.instance.num_machines] += 1;
    }

    fn next_event(&self) -> Option<Time> {
        self.machine_busy_until.iter().flatten().copied().min()
    }

    /// Moves the clock to `t` and completes every operation finishing then.
    fn advance_to(&mut self, t: Time) {
        debug_assert!(t > self.time);
        self.time = t;
        for k in 0..self.machine_busy_until.len() {
            if self.machine_busy_until[k] == Some(t) {
                self.machine_busy_until[k] = None;
            }
        }
        for v in 0..self.status.len() {
            if self.status[v] == OpStatus::Processing && self.finish[v] == Some(t) {
                self.status[v] = OpStatus::Done;
                self.done += 1;
                if let Some(s) = self.graph.successor(v) {
                    self.ready_since[s] = Some(t);
                }
            }
        }
    }
}

/// Number of jobs waiting at `tick`, reconstructed from recorded start and
/// finish times. A job waits when it has not finished, is not processing,
/// and its next operation's predecessor has completed.
pub fn waiting_jobs(state: &GraphState, tick: Time) -> usize {
    let inst = state.instance();
    (0..inst.num_jobs)
        .filter(|&j| {
            (0..inst.num_machines).any(|s| {
                let op = inst.op_id(j, s);
                let pred_done = s == 0 || state.finish[op - 1].is_some_and(|f| f <= tick);
                let not_started = state.start[op].is_none_or(|st| st > tick);
                pred_done && not_started
            })
        })
        .count()
}

/// Which reading of "degree of completion" to encode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CompletionMode {
    /// Fraction of the job's work done once this operation finishes.
    #[default]
    Cumulative,
    /// This operation's own share of the job's work.
    Incremental,
}

pub const FEATURE_DIM: usize = 8;
pub const FEAT_STATUS: usize = 0;
pub const FEAT_PROCESSING_TIME: usize = 3;
pub const FEAT_COMPLETION: usize = 4;
pub const FEAT_SUCCEEDING: usize = 5;
pub const FEAT_WAITING: usize = 6;
pub const FEAT_REMAINING: usize = 7;

/// Per-node feature rows: status one-hot (3), processing time, degree of
/// completion, number of succeeding operations (self included), waiting
/// time, remaining time (`-1` unless processing).
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures {
    pub rows: Vec<[f64; FEATURE_DIM]>,
}

pub fn node_features(state: &GraphState, mode: CompletionMode) -> NodeFeatures {
    let inst = state.instance();
    let m = inst.num_machines;
    let mut rows = Vec::with_capacity(state.num_nodes());
    for job in &inst.jobs {
        let total = job.total_time() as f64;
        let mut cumulative = 0u64;
        for op in &job.operations {
            let v = inst.op_id(op.job_id, op.step_index);
            let p = op.processing_time;
            cumulative += p as u64;
            let mut row = [0.0; FEATURE_DIM];
            let status = state.status[v];
            row[FEAT_STATUS + status as usize] = 1.0;
            row[FEAT_PROCESSING_TIME] = p as f64;
            row[FEAT_COMPLETION] = match mode {
                CompletionMode::Cumulative => cumulative as f64 / total,
                CompletionMode::Incremental => p as f64 / total,
            };
            row[FEAT_SUCCEEDING] = (m - op.step_index) as f64;
            row[FEAT_WAITING] = if state.is_ready(v) {
                (state.time - state.ready_since[v].unwrap_or(state.time)) as f64
            } else {
                0.0
            };
            row[FEAT_REMAINING] = match (status, state.finish[v]) {
                (OpStatus::Processing, Some(f)) => (f - state.time) as f64,
                _ => -1.0,
            };
            rows.push(row);
        }
    }
    NodeFeatures { rows }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledOp {
    pub job: usize,
    pub step: usize,
    pub machine: usize,
    pub start: Time,
    pub finish: Time,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Schedule {
    pub rows: Vec<ScheduledOp>,
}

impl Schedule {
    pub fn makespan(&self) -> Time {
        self.rows.iter().map(|r| r.finish).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeasibilityError {
    #[error("schedule has {found} operations, instance has {expected}")]
    Incomplete { expected: usize, found: usize },
    #[error("job {job} step {step} scheduled more than once or does not exist")]
    BadOperation { job: usize, step: usize },
    #[error("job {job} step {step}: wrong machine or duration")]
    WrongTiming { job: usize, step: usize },
    #[error("job {job}: step {step} starts before its predecessor finishes")]
    Precedence { job: usize, step: usize },
    #[error("machine {machine}: operations overlap")]
    Overlap { machine: usize },
    #[error("makespan {makespan} below lower bound {bound}")]
    BelowLowerBound { makespan: u64, bound: u64 },
}

/// Checks precedence, machine exclusivity, durations and the trivial
/// makespan lower bound of a complete schedule.
pub fn verify_schedule(instance: &JsspInstance, schedule: &Schedule) -> Result<(), FeasibilityError> {
    let n_ops = instance.num_operations();
    if schedule.rows.len() != n_ops {
        return Err(FeasibilityError::Incomplete { expected: n_ops, found: schedule.rows.len() });
    }
    let mut slot: Vec<Option<ScheduledOp>> = vec![None; n_ops];
    for r in &schedule.rows {
        if r.job >= instance.num_jobs || r.step >= instance.num_machines {
            return Err(FeasibilityError::BadOperation { job: r.job, step: r.step });
        }
        let v = instance.op_id(r.job, r.step);
        if slot[v].is_some() {
            return Err(FeasibilityError::BadOperation { job: r.job, step: r.step });
        }
        let op = instance.operation(v);
        if op.machine_id != r.machine || r.finish != r.start + op.processing_time {
            return Err(FeasibilityError::WrongTiming { job: r.job, step: r.step });
        }
        slot[v] = Some(*r);
    }
    let rows: Vec<ScheduledOp> = slot.into_iter().flatten().collect();
    for j in 0..instance.num_jobs {
        for s in 1..instance.num_machines {
            let prev = rows[instance.op_id(j, s - 1)];
            let cur = rows[instance.op_id(j, s)];
            if cur.start < prev.finish {
                return Err(FeasibilityError::Precedence { job: j, step: s });
            }
        }
    }
    for k in 0..instance.num_machines {
        let mut on_k: Vec<&ScheduledOp> = rows.iter().filter(|r| r.machine == k).collect();
        on_k.sort_by_key(|r| r.start);
        if on_k.windows(2).any(|w| w[1].start < w[0].finish) {
            return Err(FeasibilityError::Overlap { machine: k });
        }
    }
    let makespan = schedule.makespan() as u64;
    let bound = instance.trivial_lower_bound();
    if makespan < bound {
        return Err(FeasibilityError::BelowLowerBound { makespan, bound });
    }
    Ok(())
}

/// A non-trivial state's query: a free machine and its ready operations
/// (two or more, ascending id).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub machine: usize,
    pub candidates: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NextDecision {
    Decision(Decision),
    Terminal,
}

/// One non-trivial transition `(g, a, R, g')`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSample {
    pub state_before: GraphState,
    pub machine: usize,
    pub candidates: Vec<usize>,
    pub action: usize,
    /// Discounted sum of per-tick rewards since the previous sample.
    pub reward: f64,
    pub state_after: GraphState,
    pub done: bool,
    pub primitive_ticks: Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub gamma: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { gamma: 1.0 }
    }
}

/// Episode runner wrapping a [`GraphState`], its machine tie-break RNG and
/// the reward accumulator.
#[derive(Debug, Clone)]
pub struct JobShopEnv {
    state: GraphState,
    rng: ChaCha8Rng,
    gamma: f64,
    pending: Option<Decision>,
    accrued: f64,
    discount: f64,
    total_waiting_ticks: u64,
    samples: usize,
}

impl JobShopEnv {
    pub fn reset(instance: Arc<JsspInstance>, config: SimConfig, seed: u64) -> Self {
        JobShopEnv {
            state: GraphState::new(instance),
            rng: ChaCha8Rng::seed_from_u64(seed),
            gamma: config.gamma,
            pending: None,
            accrued: 0.0,
            discount: 1.0,
            total_waiting_ticks: 0,
            samples: 0,
        }
    }

    pub fn state(&self) -> &GraphState {
        &self.state
    }

    pub fn into_state(self) -> GraphState {
        self.state
    }

    /// Total of `waiting jobs` over every elapsed tick (undiscounted).
    pub fn total_waiting_ticks(&self) -> u64 {
        self.total_waiting_ticks
    }

    /// Reward accrued but not yet attached to a transition sample. Non-zero
    /// at termination only for episodes that never reached a decision.
    pub fn unattributed_reward(&self) -> f64 {
        self.accrued
    }

    /// Runs trivial transitions until a decision point or the terminal state.
    pub fn next_decision(&mut self) -> NextDecision {
        if let Some(d) = &self.pending {
            return NextDecision::Decision(d.clone());
        }
        loop {
            let mut eligible: Vec<Decision> = Vec::new();
            for (machine, ready) in self.state.ready_by_machine().into_iter().enumerate() {
                if !self.state.is_machine_free(machine) {
                    continue;
                }
                match ready.len() {
                    0 => {}
                    1 => self.state.start_op(ready[0]),
                    _ => eligible.push(Decision { machine, candidates: ready }),
                }
            }
            if !eligible.is_empty() {
                let pick = if eligible.len() == 1 { 0 } else { self.rng.gen_range(0..eligible.len()) };
                let d = eligible.swap_remove(pick);
                self.pending = Some(d.clone());
                return NextDecision::Decision(d);
            }
            let Some(next) = self.state.next_event() else {
                debug_assert!(self.state.is_terminal());
                return NextDecision::Terminal;
            };
            let waiting = self.state.waiting_job_count();
            let ticks = next - self.state.time;
            self.total_waiting_ticks += waiting as u64 * ticks as u64;
            if waiting > 0 {
                if self.gamma == 1.0 {
                    self.accrued -= (waiting as u64 * ticks as u64) as f64;
                } else {
                    for _ in 0..ticks {
                        self.accrued -= self.discount * waiting as f64;
                        self.discount *= self.gamma;
                    }
                }
            } else if self.gamma != 1.0 {
                self.discount *= crate::math::powi(self.gamma, ticks as i32);
            }
            self.state.advance_to(next);
        }
    }

    /// Loads `op` for the pending decision and advances to the next one.
    pub fn step(&mut self, op: usize) -> Result<TransitionSample, SimError> {
        let decision = match self.next_decision() {
            NextDecision::Decision(d) => d,
            NextDecision::Terminal => return Err(SimError::Terminated),
        };
        if !decision.candidates.contains(&op) {
            return Err(SimError::IllegalAction { op });
        }
        let state_before = self.state.clone();
        self.pending = None;
        self.state.start_op(op);
        let next = self.next_decision();
        let reward = core::mem::take(&mut self.accrued);
        self.discount = 1.0;
        self.samples += 1;
        Ok(TransitionSample {
            primitive_ticks: self.state.time - state_before.time,
            state_before,
            machine: decision.machine,
            candidates: decision.candidates,
            action: op,
            reward,
            state_after: self.state.clone(),
            done: matches!(next, NextDecision::Terminal),
        })
    }
}

/// Terminal state of an episode plus its reward bookkeeping.
#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub state: GraphState,
    pub decisions: usize,
    /// Sum of every transition reward plus any unattributed remainder.
    pub total_reward: f64,
}

impl EpisodeOutcome {
    pub fn makespan(&self) -> Time {
        self.state.makespan().expect("episode ran to termination")
    }
}

/// Drives an episode to termination, asking `choose` at every decision point.
pub fn run_episode<E: From<SimError>>(
    instance: Arc<JsspInstance>,
    config: SimConfig,
    seed: u64,
    mut choose: impl FnMut(&GraphState, &Decision) -> Result<usize, E>,
) -> Result<EpisodeOutcome, E> {
    let mut env = JobShopEnv::reset(instance, config, seed);
    let mut decisions = 0;
    let mut total_reward = 0.0;
    while let NextDecision::Decision(d) = env.next_decision() {
        let op = choose(env.state(), &d)?;
        total_reward += env.step(op)?.reward;
        decisions += 1;
    }
    total_reward += env.unattributed_reward();
    Ok(EpisodeOutcome { state: env.into_state(), decisions, total_reward })
}
