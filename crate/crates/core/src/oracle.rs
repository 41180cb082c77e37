//! Exact minimum makespan for small instances.
//!
//! Depth-first branch-and-bound over active schedules. At each node the
//! unscheduled operation with the earliest possible completion fixes a
//! machine; every operation on that machine that could start before that
//! completion is a child. Children are visited in order of earliest
//! completion, then operation id, so the search is deterministic.
//!
//! Lower bound per node: the larger of
//! * each job's ready time plus its remaining work, and
//! * for each machine, a one-machine bound `max_h (h + sum p_i + min tail_i)`
//!   over the unscheduled operations with head `>= h`.
//!
//! A child's bound is never below its parent's.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::instance::{JsspInstance, Time};
use crate::simulator::{Schedule, ScheduledOp};

/// Result of a search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum OracleResult {
    Exact { value: Time },
    Bounds { lb: Time, ub: Time },
}

impl OracleResult {
    pub fn exact(&self) -> Option<Time> {
        match *self {
            OracleResult::Exact { value } => Some(value),
            OracleResult::Bounds { .. } => None,
        }
    }

    pub fn lower(&self) -> Time {
        match *self {
            OracleResult::Exact { value } => value,
            OracleResult::Bounds { lb, .. } => lb,
        }
    }

    pub fn upper(&self) -> Time {
        match *self {
            OracleResult::Exact { value } => value,
            OracleResult::Bounds { ub, .. } => ub,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub result: OracleResult,
    /// Nodes taken off the search stack.
    pub nodes: u64,
    /// The best schedule found.
    pub schedule: Schedule,
}

#[derive(Debug, Clone)]
struct Node {
    next_step: Vec<usize>,
    job_ready: Vec<Time>,
    machine_ready: Vec<Time>,
    start: Vec<Time>,
    scheduled: usize,
    lb: Time,
}

struct Ctx<'a> {
    inst: &'a JsspInstance,
    /// `tail[op]`: work after `op` in its job.
    tail: Vec<Time>,
}

impl Ctx<'_> {
    fn lower_bound(&self, node: &Node) -> Time {
        let inst = self.inst;
        let m = inst.num_machines;
        let mut lb = node.job_ready.iter().copied().max().unwrap_or(0);
        // (head, p, tail) of the unscheduled operations, per machine.
        let mut per_machine: Vec<Vec<(Time, Time, Time)>> = vec![Vec::new(); m];
        for j in 0..inst.num_jobs {
            let mut head = node.job_ready[j];
            for s in node.next_step[j]..m {
                let op = inst.op_id(j, s);
                let o = inst.operation(op);
                let h = head.max(node.machine_ready[o.machine_id]);
                per_machine[o.machine_id].push((h, o.processing_time, self.tail[op]));
                head += o.processing_time;
            }
            if node.next_step[j] < m {
                lb = lb.max(head);
            }
        }
        for ops in &mut per_machine {
            ops.sort_unstable_by(|a, b| b.0.cmp(&a.0));
            let mut work: Time = 0;
            let mut min_tail = Time::MAX;
            for &(h, p, q) in ops.iter() {
                work += p;
                min_tail = min_tail.min(q);
                lb = lb.max(h + work + min_tail);
            }
        }
        lb
    }

    fn leaf_makespan(&self, node: &Node) -> Time {
        node.job_ready.iter().copied().max().unwrap_or(0)
    }

    fn children(&self, node: &Node) -> Vec<Node> {
        let inst = self.inst;
        let m = inst.num_machines;
        // (earliest start, earliest completion, op)
        let mut frontier: Vec<(Time, Time, usize)> = Vec::new();
        for j in 0..inst.num_jobs {
            let s = node.next_step[j];
            if s < m {
                let op = inst.op_id(j, s);
                let o = inst.operation(op);
                let est = node.job_ready[j].max(node.machine_ready[o.machine_id]);
                frontier.push((est, est + o.processing_time, op));
            }
        }
        let &(_, c_star, op_star) = frontier.iter().min_by_key(|&&(_, c, op)| (c, op)).expect("not a leaf");
        let machine = inst.operation(op_star).machine_id;
        let mut conflict: Vec<(Time, Time, usize)> = frontier
            .into_iter()
            .filter(|&(est, _, op)| inst.operation(op).machine_id == machine && est < c_star)
            .collect();
        conflict.sort_unstable_by_key(|&(_, c, op)| (c, op));
        conflict
            .into_iter()
            .map(|(est, c, op)| {
                let o = inst.operation(op);
                let mut child = node.clone();
                child.next_step[o.job_id] += 1;
                child.job_ready[o.job_id] = c;
                child.machine_ready[machine] = c;
                child.start[op] = est;
                child.scheduled += 1;
                child.lb = self.lower_bound(&child).max(node.lb);
                child
            })
            .collect()
    }
}

fn to_schedule(inst: &JsspInstance, start: &[Time]) -> Schedule {
    let rows = inst
        .operations()
        .enumerate()
        .map(|(v, o)| ScheduledOp {
            job: o.job_id,
            step: o.step_index,
            machine: o.machine_id,
            start: start[v],
            finish: start[v] + o.processing_time,
        })
        .collect();
    Schedule { rows }
}

/// Searches at most `node_budget` nodes.
pub fn solve(instance: &JsspInstance, node_budget: u64) -> OracleReport {
    let m = instance.num_machines;
    let n = instance.num_jobs;
    let mut tail = vec![0; instance.num_operations()];
    for j in 0..n {
        let mut acc = 0;
        for s in (0..m).rev() {
            let op = instance.op_id(j, s);
            tail[op] = acc;
            acc += instance.operation(op).processing_time;
        }
    }
    let ctx = Ctx { inst: instance, tail };
    let mut root = Node {
        next_step: vec![0; n],
        job_ready: vec![0; n],
        machine_ready: vec![0; m],
        start: vec![0; instance.num_operations()],
        scheduled: 0,
        lb: 0,
    };
    root.lb = ctx.lower_bound(&root);
    let total = instance.num_operations();

    let mut incumbent = Time::MAX;
    let mut best_start: Vec<Time> = Vec::new();
    let mut stack = vec![root];
    let mut nodes = 0u64;
    while let Some(node) = stack.last() {
        if nodes >= node_budget {
            break;
        }
        let node_lb = node.lb;
        let node = stack.pop().expect("nonempty");
        nodes += 1;
        if node_lb >= incumbent {
            continue;
        }
        if node.scheduled == total {
            incumbent = ctx.leaf_makespan(&node);
            best_start = node.start;
            continue;
        }
        let mut kids = ctx.children(&node);
        kids.retain(|k| k.lb < incumbent);
        stack.extend(kids.into_iter().rev());
    }

    let frontier_lb = stack.iter().map(|s| s.lb).min();
    let result = match frontier_lb {
        Some(f) if f < incumbent => {
            if incumbent == Time::MAX {
                // No leaf reached within budget; complete greedily for an upper bound.
                let (ub, start) = greedy_completion(&ctx, stack.pop().expect("nonempty"));
                incumbent = ub;
                best_start = start;
            }
            OracleResult::Bounds { lb: f, ub: incumbent }
        }
        _ => OracleResult::Exact { value: incumbent },
    };
    OracleReport { result, nodes, schedule: to_schedule(instance, &best_start) }
}

/// Follows the first child to a leaf.
fn greedy_completion(ctx: &Ctx<'_>, mut node: Node) -> (Time, Vec<Time>) {
    let total = ctx.inst.num_operations();
    while node.scheduled < total {
        node = ctx.children(&node).swap_remove(0);
    }
    (ctx.leaf_makespan(&node), node.start)
}

/// Default node budget, ample for instances up to about 6x6.
pub const DEFAULT_NODE_BUDGET: u64 = 20_000_000;

pub fn optimal_makespan(instance: &JsspInstance, node_budget: u64) -> OracleResult {
    solve(instance, node_budget).result
}
