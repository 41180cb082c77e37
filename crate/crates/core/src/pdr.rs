//! Priority dispatching rules.
//!
//! Each rule scores the candidates at a decision point and picks the best
//! score. Ties go to the lowest operation id, which orders by `(job, step)`.

use alloc::sync::Arc;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::instance::{JsspInstance, Time};
use crate::simulator::{run_episode, Decision, GraphState, Schedule, SimConfig, SimError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PdrError {
    #[error("no candidate operations")]
    EmptyCandidates,
    #[error("unknown dispatching rule `{0}`")]
    UnknownRule(alloc::string::String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Fifo,
    Lifo,
    Spt,
    Lpt,
    Stpt,
    Ltpt,
    Lor,
    Mor,
    Lqno,
    Mqno,
    Random,
}

impl Rule {
    pub const ALL: [Rule; 11] = [
        Rule::Fifo,
        Rule::Lifo,
        Rule::Spt,
        Rule::Lpt,
        Rule::Stpt,
        Rule::Ltpt,
        Rule::Lor,
        Rule::Mor,
        Rule::Lqno,
        Rule::Mqno,
        Rule::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Fifo => "fifo",
            Rule::Lifo => "lifo",
            Rule::Spt => "spt",
            Rule::Lpt => "lpt",
            Rule::Stpt => "stpt",
            Rule::Ltpt => "ltpt",
            Rule::Lor => "lor",
            Rule::Mor => "mor",
            Rule::Lqno => "lqno",
            Rule::Mqno => "mqno",
            Rule::Random => "random",
        }
    }

    pub fn is_deterministic(self) -> bool {
        self != Rule::Random
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Rule {
    type Err = PdrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        Rule::ALL
            .into_iter()
            .find(|r| r.name() == lower)
            .ok_or_else(|| PdrError::UnknownRule(s.into()))
    }
}

/// Jobs whose currently ready operation is routed to `machine`.
fn queue_length(state: &GraphState, machine: usize) -> u64 {
    let inst = state.instance();
    let m = inst.num_machines;
    (0..inst.num_jobs)
        .filter(|&j| {
            let s = state.next_step(j);
            s < m && {
                let op = inst.op_id(j, s);
                state.is_ready(op) && inst.operation(op).machine_id == machine
            }
        })
        .count() as u64
}

/// Score to minimize; `max` rules negate.
fn score(rule: Rule, state: &GraphState, op: usize) -> i64 {
    let inst = state.instance();
    let o = inst.operation(op);
    let m = inst.num_machines;
    let queue_at_next = || {
        if o.step_index + 1 == m {
            0
        } else {
            let next = inst.operation(op + 1).machine_id;
            queue_length(state, next) as i64
        }
    };
    let ready = || state.ready_since(op).unwrap_or(state.time()) as i64;
    let job_total = || inst.jobs[o.job_id].total_time() as i64;
    let remaining = (m - o.step_index) as i64;
    match rule {
        Rule::Fifo => ready(),
        Rule::Lifo => -ready(),
        Rule::Spt => o.processing_time as i64,
        Rule::Lpt => -(o.processing_time as i64),
        Rule::Stpt => job_total(),
        Rule::Ltpt => -job_total(),
        Rule::Lor => remaining,
        Rule::Mor => -remaining,
        Rule::Lqno => queue_at_next(),
        Rule::Mqno => -queue_at_next(),
        Rule::Random => 0,
    }
}

/// Picks one of `candidates` by `rule`.
pub fn choose(
    rule: Rule,
    state: &GraphState,
    candidates: &[usize],
    rng: &mut impl Rng,
) -> Result<usize, PdrError> {
    if candidates.is_empty() {
        return Err(PdrError::EmptyCandidates);
    }
    if rule == Rule::Random {
        return Ok(candidates[rng.gen_range(0..candidates.len())]);
    }
    let best = candidates
        .iter()
        .copied()
        .min_by_key(|&op| (score(rule, state, op), op))
        .expect("nonempty");
    Ok(best)
}

#[derive(Debug, Clone)]
pub struct PdrRun {
    pub schedule: Schedule,
    pub makespan: Time,
    pub decisions: usize,
}

/// Runs `rule` from reset to termination. `seed` drives machine tie-breaks
/// and, for [`Rule::Random`], the candidate draws.
pub fn run_pdr(instance: Arc<JsspInstance>, rule: Rule, seed: u64) -> Result<PdrRun, PdrError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5044_5252);
    let out = run_episode(instance, SimConfig::default(), seed, |state, d: &Decision| {
        choose(rule, state, &d.candidates, &mut rng)
    })?;
    Ok(PdrRun { schedule: out.state.schedule(), makespan: out.makespan(), decisions: out.decisions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn spt_and_mor_examples() {
        // Three single-op jobs on one machine: times 5, 3, 9.
        let inst = JsspInstance::from_routes(1, &[vec![(0, 5)], vec![(0, 3)], vec![(0, 9)]], None).unwrap();
        let s = GraphState::new(Arc::new(inst));
        assert_eq!(choose(Rule::Spt, &s, &[0, 1, 2], &mut rng()).unwrap(), 1);
        assert_eq!(choose(Rule::Lpt, &s, &[0, 1, 2], &mut rng()).unwrap(), 2);

        // Job 0 has four ops left, job 1 has two (started from its third op).
        let routes = vec![vec![(0, 1), (1, 1), (2, 1), (3, 1)], vec![(1, 1), (2, 1), (0, 1), (3, 1)]];
        let inst = Arc::new(JsspInstance::from_routes(4, &routes, None).unwrap());
        let s = GraphState::new(inst);
        // Op 6 is job 1 step 2: score only depends on step index.
        assert_eq!(score(Rule::Mor, &s, 0), -4);
        assert_eq!(score(Rule::Mor, &s, 6), -2);
        assert_eq!(choose(Rule::Mor, &s, &[0, 6], &mut rng()).unwrap(), 0);
        assert_eq!(choose(Rule::Lor, &s, &[0, 6], &mut rng()).unwrap(), 6);
    }

    #[test]
    fn single_candidate_and_empty() {
        let inst = JsspInstance::from_routes(1, &[vec![(0, 5)]], None).unwrap();
        let s = GraphState::new(Arc::new(inst));
        for rule in Rule::ALL {
            assert_eq!(choose(rule, &s, &[0], &mut rng()).unwrap(), 0);
            assert_eq!(choose(rule, &s, &[], &mut rng()), Err(PdrError::EmptyCandidates));
        }
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let inst = JsspInstance::from_routes(1, &[vec![(0, 4)], vec![(0, 4)]], None).unwrap();
        let s = GraphState::new(Arc::new(inst));
        for rule in Rule::ALL.into_iter().filter(|r| r.is_deterministic()) {
            assert_eq!(choose(rule, &s, &[1, 0], &mut rng()).unwrap(), 0, "{rule}");
        }
    }

    #[test]
    fn single_machine_makespan_is_rule_invariant() {
        let inst = Arc::new(JsspInstance::from_routes(1, &[vec![(0, 3)], vec![(0, 4)]], None).unwrap());
        for rule in Rule::ALL {
            let run = run_pdr(inst.clone(), rule, 9).unwrap();
            assert_eq!(run.makespan, 7);
            assert_eq!(run.decisions, 1);
        }
    }

    #[test]
    fn queue_rules_look_at_next_machine() {
        // Jobs 0 and 1 compete for machine 0. Job 0 continues on machine 1,
        // where jobs 2 and 3 queue; job 1 continues on machine 2 (empty).
        let routes = vec![
            vec![(0, 2), (1, 2), (2, 2)],
            vec![(0, 2), (2, 2), (1, 2)],
            vec![(1, 5), (0, 5), (2, 5)],
            vec![(1, 5), (2, 5), (0, 5)],
        ];
        let inst = Arc::new(JsspInstance::from_routes(3, &routes, None).unwrap());
        let s = GraphState::new(inst);
        assert_eq!(score(Rule::Lqno, &s, 0), 2);
        assert_eq!(score(Rule::Lqno, &s, 3), 0);
        assert_eq!(choose(Rule::Lqno, &s, &[0, 3], &mut rng()).unwrap(), 3);
        assert_eq!(choose(Rule::Mqno, &s, &[0, 3], &mut rng()).unwrap(), 0);
    }

    #[test]
    fn rule_names_round_trip() {
        let names: Vec<_> = Rule::ALL.iter().map(|r| r.name()).collect();
        assert_eq!(names.len(), 11);
        for r in Rule::ALL {
            assert_eq!(r.name().parse::<Rule>().unwrap(), r);
        }
        assert_eq!("MOR".parse::<Rule>().unwrap(), Rule::Mor);
        assert!("best".parse::<Rule>().is_err());
    }
}
