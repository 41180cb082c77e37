//! Reference implementations used only by tests.
//!
//! Everything here is deliberately naive: exhaustive enumeration, literal
//! tick-by-tick replays and explicit sums. None of it shares code paths
//! with the library beyond the instance and schedule data types.

use std::collections::VecDeque;
use std::sync::Arc;

use jssp_core::agent::{Gradients, ModelConfig, ParameterSet};
use jssp_core::instance::{generate_uniform_benchmark, Interval};
use jssp_core::ppo::{collect_episode, ppo_objective, PpoConfig, Sample, Step};
use jssp_core::simulator::{run_episode, EpisodeOutcome, Schedule, SimConfig, SimError};
use jssp_core::{JsspInstance, Time};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Earliest-start makespan of the schedule induced by fixed per-machine
/// orders, or `None` when the orders contradict the job routes.
pub fn makespan_for_orders(inst: &JsspInstance, orders: &[Vec<usize>]) -> Option<Time> {
    let n_ops = inst.num_operations();
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n_ops];
    let mut indeg = vec![0usize; n_ops];
    let mut edge = |a: usize, b: usize, succ: &mut Vec<Vec<usize>>| {
        succ[a].push(b);
        indeg[b] += 1;
    };
    for j in 0..inst.num_jobs {
        for s in 1..inst.num_machines {
            edge(inst.op_id(j, s - 1), inst.op_id(j, s), &mut succ);
        }
    }
    for order in orders {
        for w in order.windows(2) {
            edge(w[0], w[1], &mut succ);
        }
    }
    let mut start = vec![0 as Time; n_ops];
    let mut queue: VecDeque<usize> = (0..n_ops).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    let mut makespan = 0;
    while let Some(v) = queue.pop_front() {
        seen += 1;
        let finish = start[v] + inst.operation(v).processing_time;
        makespan = makespan.max(finish);
        for &w in &succ[v] {
            start[w] = start[w].max(finish);
            indeg[w] -= 1;
            if indeg[w] == 0 {
                queue.push_back(w);
            }
        }
    }
    (seen == n_ops).then_some(makespan)
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Minimum makespan over every combination of per-machine operation orders.
/// Cost is `(n!)^m`; meant for instances up to 3x3.
pub fn brute_force_makespan(inst: &JsspInstance) -> Time {
    let m = inst.num_machines;
    let per_machine: Vec<Vec<Vec<usize>>> = (0..m)
        .map(|k| {
            let ops: Vec<usize> =
                (0..inst.num_operations()).filter(|&v| inst.operation(v).machine_id == k).collect();
            permutations(&ops)
        })
        .collect();
    let mut idx = vec![0usize; m];
    let mut best = Time::MAX;
    loop {
        let orders: Vec<Vec<usize>> = (0..m).map(|k| per_machine[k][idx[k]].clone()).collect();
        if let Some(c) = makespan_for_orders(inst, &orders) {
            best = best.min(c);
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == m {
                return best;
            }
            idx[k] += 1;
            if idx[k] < per_machine[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// `sum_t waiting(t)` for `t` in `[0, makespan)`, where a job waits at tick
/// `t` if its next unstarted operation has its predecessor finished by `t`.
pub fn replay_waiting_ticks(inst: &JsspInstance, schedule: &Schedule) -> u64 {
    let mut start = vec![vec![0 as Time; inst.num_machines]; inst.num_jobs];
    let mut finish = start.clone();
    for r in &schedule.rows {
        start[r.job][r.step] = r.start;
        finish[r.job][r.step] = r.finish;
    }
    let makespan = schedule.makespan();
    let mut total = 0u64;
    for t in 0..makespan {
        for j in 0..inst.num_jobs {
            let next = (0..inst.num_machines).find(|&s| start[j][s] > t);
            let waiting = match next {
                None => false,
                Some(0) => true,
                Some(s) => finish[j][s - 1] <= t,
            };
            total += waiting as u64;
        }
    }
    total
}

/// `A_t = sum_k (gamma lambda)^k delta_{t+k}` evaluated term by term.
pub fn gae_explicit(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let t_len = rewards.len();
    let delta: Vec<f64> = (0..t_len)
        .map(|t| {
            let next = if t + 1 < t_len { values[t + 1] } else { 0.0 };
            rewards[t] + gamma * next - values[t]
        })
        .collect();
    (0..t_len)
        .map(|t| (t..t_len).map(|i| (gamma * lambda).powi((i - t) as i32) * delta[i]).sum())
        .collect()
}

/// Uniformly random choice at every decision point.
pub fn run_random(inst: Arc<JsspInstance>, seed: u64) -> EpisodeOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x0D15_EA5E));
    run_episode(inst, SimConfig::default(), seed, |_, d| {
        Ok::<_, SimError>(d.candidates[rng.gen_range(0..d.candidates.len())])
    })
    .expect("random policy only picks candidates")
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_difference(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// One compared gradient coordinate.
#[derive(Debug, Clone, Copy)]
pub struct GradientProbe {
    pub tensor: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Central differences of `f` at the chosen `(tensor, index)` coordinates.
pub fn finite_difference_probes(
    params: &ParameterSet,
    analytic: &Gradients,
    coords: &[(usize, usize)],
    h: f64,
    f: impl Fn(&ParameterSet) -> f64,
) -> Vec<GradientProbe> {
    coords
        .iter()
        .map(|&(tensor, index)| {
            let eval = |delta: f64| {
                let mut p = params.clone();
                let mlp = p.mlps_mut().nth(tensor).expect("tensor index in range");
                mlp.params_mut()[index] += delta;
                f(&p)
            };
            let numeric = (eval(h) - eval(-h)) / (2.0 * h);
            GradientProbe { tensor, index, analytic: analytic.tensors[tensor][index], numeric }
        })
        .collect()
}

/// Adds uniform noise in `[-scale, scale]` to every bias. Fresh networks
/// have zero biases, which puts hidden units fed by all-zero rows exactly
/// on the ReLU kink where central differences are meaningless.
pub fn jitter_biases(params: &mut ParameterSet, scale: f64, rng: &mut impl Rng) {
    for mlp in params.mlps_mut() {
        let shapes = mlp.tensor_shapes();
        let mut offset = 0;
        let mut ranges = Vec::new();
        for (i, (r, c)) in shapes.iter().enumerate() {
            if i % 2 == 1 {
                ranges.push(offset..offset + r * c);
            }
            offset += r * c;
        }
        let p = mlp.params_mut();
        for range in ranges {
            for x in &mut p[range] {
                *x += rng.gen_range(-scale..=scale);
            }
        }
    }
}

/// A few coordinates per tensor: the largest analytic entries plus random ones.
pub fn probe_coordinates(analytic: &Gradients, per_tensor: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (t, g) in analytic.tensors.iter().enumerate() {
        let mut order: Vec<usize> = (0..g.len()).collect();
        order.sort_by(|&a, &b| g[b].abs().total_cmp(&g[a].abs()).then(a.cmp(&b)));
        out.extend(order.iter().take(per_tensor / 2).map(|&i| (t, i)));
        for _ in 0..per_tensor - per_tensor / 2 {
            out.push((t, rng.gen_range(0..g.len())));
        }
    }
    out
}

/// Every way `schedule` fails to be a feasible complete schedule of `inst`:
/// missing or repeated operations, wrong machine or duration, a step that
/// starts before its predecessor ends, overlap on a machine, or a makespan
/// below the largest job or machine workload.
pub fn schedule_violations(inst: &JsspInstance, schedule: &Schedule) -> Vec<String> {
    let mut out = Vec::new();
    let mut seen = vec![vec![None; inst.num_machines]; inst.num_jobs];
    for r in &schedule.rows {
        let Some(op) = inst.jobs.get(r.job).and_then(|j| j.operations.get(r.step)) else {
            out.push(format!("unknown operation ({}, {})", r.job, r.step));
            continue;
        };
        if r.machine != op.machine_id || r.finish != r.start + op.processing_time {
            out.push(format!("({}, {}) has the wrong machine or duration", r.job, r.step));
        }
        if seen[r.job][r.step].replace((r.start, r.finish)).is_some() {
            out.push(format!("({}, {}) scheduled twice", r.job, r.step));
        }
    }
    for (j, steps) in seen.iter().enumerate() {
        for (s, slot) in steps.iter().enumerate() {
            match (slot, s.checked_sub(1).and_then(|p| steps[p])) {
                (None, _) => out.push(format!("({j}, {s}) never scheduled")),
                (Some((start, _)), Some((_, prev_finish))) if *start < prev_finish => {
                    out.push(format!("({j}, {s}) starts before its predecessor finishes"))
                }
                _ => {}
            }
        }
    }
    for machine in 0..inst.num_machines {
        let mut spans: Vec<(Time, Time)> =
            schedule.rows.iter().filter(|r| r.machine == machine).map(|r| (r.start, r.finish)).collect();
        spans.sort_unstable();
        if spans.windows(2).any(|w| w[1].0 < w[0].1) {
            out.push(format!("machine {machine} runs two operations at once"));
        }
    }
    let job_bound = inst.jobs.iter().map(|j| j.operations.iter().map(|o| o.processing_time).sum::<Time>());
    let machine_bound = (0..inst.num_machines).map(|k| {
        inst.jobs.iter().flat_map(|j| &j.operations).filter(|o| o.machine_id == k).map(|o| o.processing_time).sum()
    });
    let bound = job_bound.chain(machine_bound).max().unwrap_or(0);
    let makespan = schedule.rows.iter().map(|r| r.finish).max().unwrap_or(0);
    if makespan < bound {
        out.push(format!("makespan {makespan} below the workload bound {bound}"));
    }
    out
}

/// Central-difference step for the full objective. Three stacked layers of
/// 256 rectified units put some kink within 1e-4 of almost any point.
pub const OBJECTIVE_STEP: f64 = 1e-6;
/// Rounding error at that step is about `1e-16 |f| / h`, near 1e-9 here.
pub const OBJECTIVE_FLOOR: f64 = 1e-4;
/// Bias noise that moves hidden units off their kinks.
pub const JITTER: f64 = 0.05;

/// Worst relative gradient error of the full clipped objective.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveCheck {
    pub states: usize,
    pub probes: usize,
    pub worst: f64,
}

pub fn jittered_params(config: ModelConfig, seed: u64) -> ParameterSet {
    let mut p = ParameterSet::new(config, seed);
    jitter_biases(&mut p, JITTER, &mut ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5));
    p
}

pub fn decision_steps(seed: u64, params: &ParameterSet, m: usize, n: usize) -> Vec<Step> {
    let inst = Arc::new(generate_uniform_benchmark(seed, m, n, Interval::new(1, 20)).expect("valid size"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    collect_episode(inst, params, &PpoConfig::default(), &mut rng).expect("episode runs").steps
}

/// Compares the analytic gradient of the clipped objective, through the
/// default embedding stack and both heads, with central differences on
/// `states` random decision states from 2..4 x 2..4 instances. Old
/// log-probabilities are offset so both clip branches occur. A coordinate
/// that disagrees is retried at a tenth of the step: a kink closer than the
/// step biases one difference, a wrong gradient disagrees at every step.
pub fn check_objective_gradient(states: usize, per_tensor: usize) -> ObjectiveCheck {
    let config = PpoConfig::default();
    let mut worst: f64 = 0.0;
    let mut probes = 0;
    let mut checked = 0;
    for seed in 0u64.. {
        if checked == states {
            break;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let params = jittered_params(ModelConfig::default(), seed);
        let (m, n) = (rng.gen_range(2..=4), rng.gen_range(2..=4));
        let steps = decision_steps(seed, &params, m, n);
        if steps.is_empty() {
            continue;
        }
        let mut step = steps[rng.gen_range(0..steps.len())].clone();
        step.old_log_prob += [-0.6, 0.0, 0.6][checked % 3];
        checked += 1;
        let batch = [Sample { step: &step, advantage: rng.gen_range(-3.0..3.0), target: rng.gen_range(-10.0..0.0) }];
        let (_, grads) = ppo_objective(&params, &batch, &config).expect("objective evaluates");
        let coords = probe_coordinates(&grads, per_tensor, &mut rng);
        let objective = |p: &ParameterSet| ppo_objective(p, &batch, &config).expect("objective evaluates").0.total;
        for c in finite_difference_probes(&params, &grads, &coords, OBJECTIVE_STEP, objective) {
            let mut rel = relative_difference(c.analytic, c.numeric, OBJECTIVE_FLOOR);
            if rel >= 1e-4 {
                let f = finite_difference_probes(&params, &grads, &[(c.tensor, c.index)], OBJECTIVE_STEP / 10.0, objective)[0];
                rel = rel.min(relative_difference(f.analytic, f.numeric, OBJECTIVE_FLOOR));
            }
            worst = worst.max(rel);
            probes += 1;
        }
    }
    ObjectiveCheck { states: checked, probes, worst }
}
