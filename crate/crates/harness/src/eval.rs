//! Policy evaluation against reference makespans.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use jssp_core::agent::{run_agent, AgentError, DecodeMode, ParameterSet};
use jssp_core::metrics::{relative_error, summarize, MetricError, ReferenceMakespan};
use jssp_core::pdr::{run_pdr, PdrError, Rule};
use jssp_core::simulator::{verify_schedule, FeasibilityError, Schedule};
use jssp_core::{JsspInstance, Time};
use serde::{Deserialize, Serialize};

use crate::io::References;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no reference makespan for instance `{0}`")]
    MissingReference(String),
    #[error("instance `{0}` has no name")]
    Unnamed(usize),
    #[error("duplicate instance name `{0}`")]
    DuplicateName(String),
    #[error("`{policy}` on `{instance}`: {source}")]
    Infeasible { policy: String, instance: String, source: FeasibilityError },
    #[error(transparent)]
    Pdr(#[from] PdrError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("unknown policy `{0}`: expected a rule name or gnn:<checkpoint>")]
    UnknownPolicy(String),
}

/// A policy as named on the command line: a rule name, `random`, or
/// `gnn:<checkpoint path>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicySpec {
    Rule(Rule),
    Gnn(String),
}

impl FromStr for PolicySpec {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(path) = s.strip_prefix("gnn:") {
            return Ok(PolicySpec::Gnn(path.to_string()));
        }
        s.parse::<Rule>().map(PolicySpec::Rule).map_err(|_| EvalError::UnknownPolicy(s.to_string()))
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Rule(r) => write!(f, "{r}"),
            PolicySpec::Gnn(p) => write!(f, "gnn:{p}"),
        }
    }
}

/// A loaded policy ready to run.
pub enum Policy<'a> {
    Rule(Rule),
    Gnn { id: String, params: &'a ParameterSet },
}

impl Policy<'_> {
    pub fn id(&self) -> String {
        match self {
            Policy::Rule(r) => r.to_string(),
            Policy::Gnn { id, .. } => id.clone(),
        }
    }

    fn is_stochastic(&self, mode: DecodeMode) -> bool {
        match self {
            Policy::Rule(r) => !r.is_deterministic(),
            Policy::Gnn { .. } => mode == DecodeMode::Sample,
        }
    }

    /// One rollout: schedule and makespan.
    pub fn run(&self, instance: Arc<JsspInstance>, seed: u64, mode: DecodeMode) -> Result<(Schedule, Time), EvalError> {
        Ok(match self {
            Policy::Rule(r) => {
                let run = run_pdr(instance, *r, seed)?;
                (run.schedule, run.makespan)
            }
            Policy::Gnn { params, .. } => {
                let out = run_agent(params, instance, seed, mode)?;
                let makespan = out.makespan();
                (out.state.schedule(), makespan)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub seed: u64,
    /// Rollouts per instance for stochastic policies; the best is reported.
    pub rollouts: usize,
    pub mode: DecodeMode,
    /// Record wall-clock time per row. Off makes reports reproducible byte for byte.
    pub timing: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { seed: 0, rollouts: 1, mode: DecodeMode::Sample, timing: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub instance: String,
    pub family: String,
    pub machines: usize,
    pub jobs: usize,
    pub policy: String,
    pub makespan: Time,
    pub reference: f64,
    /// False when the reference is a bound midpoint rather than an optimum.
    pub reference_exact: bool,
    pub relative_error: f64,
    pub wall_ms: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub group: String,
    pub policy: String,
    pub count: usize,
    pub mean_error: f64,
    /// Population standard deviation over instances.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub rollouts: usize,
    pub decode: DecodeMode,
    pub rows: Vec<EvalRow>,
    pub aggregates: Vec<Aggregate>,
}

/// Leading letters of the instance name, lowercased: `ta21` and `TA42`
/// share family `ta`.
pub fn family_of(name: &str) -> String {
    let f: String = name.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
    if f.is_empty() { "other".into() } else { f.to_ascii_lowercase() }
}

/// Groups `all`, `family:<f>` and `size:<jobs>x<machines>`, per policy in
/// first-seen order.
pub fn aggregate(rows: &[EvalRow]) -> Vec<Aggregate> {
    let mut policies: Vec<&str> = Vec::new();
    for r in rows {
        if !policies.contains(&r.policy.as_str()) {
            policies.push(&r.policy);
        }
    }
    let mut out = Vec::new();
    for p in policies {
        let mine: Vec<&EvalRow> = rows.iter().filter(|r| r.policy == p).collect();
        let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in &mine {
            groups.entry(format!("family:{}", r.family)).or_default().push(r.relative_error);
            groups.entry(format!("size:{}x{}", r.jobs, r.machines)).or_default().push(r.relative_error);
        }
        let all: Vec<f64> = mine.iter().map(|r| r.relative_error).collect();
        for (group, errs) in std::iter::once(("all".to_string(), all)).chain(groups) {
            let s = summarize(&errs);
            out.push(Aggregate { group, policy: p.to_string(), count: errs.len(), mean_error: s.mean, std_error: s.std });
        }
    }
    out
}

/// Runs every policy on every instance. Rows are ordered by instance name,
/// then by the order of `policies`. Every schedule is checked for
/// feasibility before it is reported.
pub fn evaluate(
    policies: &[Policy<'_>],
    instances: &[Arc<JsspInstance>],
    references: &References,
    options: EvalOptions,
) -> Result<EvalReport, EvalError> {
    let mut named: Vec<(&str, &Arc<JsspInstance>)> = Vec::with_capacity(instances.len());
    for (i, inst) in instances.iter().enumerate() {
        named.push((inst.name.as_deref().ok_or(EvalError::Unnamed(i))?, inst));
    }
    named.sort_by(|a, b| a.0.cmp(b.0));
    if let Some(w) = named.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(EvalError::DuplicateName(w[0].0.to_string()));
    }
    let mut rows = Vec::new();
    for (name, inst) in named {
        let reference: ReferenceMakespan =
            *references.get(name).ok_or_else(|| EvalError::MissingReference(name.to_string()))?;
        for policy in policies {
            let k = if policy.is_stochastic(options.mode) { options.rollouts.max(1) } else { 1 };
            let started = Instant::now();
            let mut best: Option<Time> = None;
            for r in 0..k {
                let (schedule, makespan) = policy.run(inst.clone(), options.seed.wrapping_add(r as u64), options.mode)?;
                verify_schedule(inst, &schedule).map_err(|source| EvalError::Infeasible {
                    policy: policy.id(),
                    instance: name.to_string(),
                    source,
                })?;
                best = Some(best.map_or(makespan, |b| b.min(makespan)));
            }
            let makespan = best.expect("at least one rollout");
            let wall_ms = if options.timing { started.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
            rows.push(EvalRow {
                instance: name.to_string(),
                family: family_of(name),
                machines: inst.num_machines,
                jobs: inst.num_jobs,
                policy: policy.id(),
                makespan,
                reference: reference.value(),
                reference_exact: reference.is_exact(),
                relative_error: relative_error(makespan, reference.value())?,
                wall_ms,
                seed: options.seed,
            });
        }
    }
    let aggregates = aggregate(&rows);
    Ok(EvalReport { seed: options.seed, rollouts: options.rollouts.max(1), decode: options.mode, rows, aggregates })
}

impl EvalReport {
    /// Mean error of `policy` over every instance.
    pub fn mean_error(&self, policy: &str) -> Option<f64> {
        self.aggregates.iter().find(|a| a.group == "all" && a.policy == policy).map(|a| a.mean_error)
    }

    /// `instance,family,machines,jobs,policy,makespan,reference,reference_exact,relative_error,wall_ms,seed`.
    pub fn rows_csv(&self) -> String {
        let mut s = String::from(
            "instance,family,machines,jobs,policy,makespan,reference,reference_exact,relative_error,wall_ms,seed\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.instance,
                r.family,
                r.machines,
                r.jobs,
                r.policy,
                r.makespan,
                r.reference,
                r.reference_exact,
                r.relative_error,
                r.wall_ms,
                r.seed
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn named(routes: &[Vec<(usize, Time)>], m: usize, name: &str) -> Arc<JsspInstance> {
        Arc::new(JsspInstance::from_routes(m, routes, Some(name.into())).unwrap())
    }

    #[test]
    fn single_instance_single_rule() {
        let inst = named(&[vec![(0, 5)], vec![(0, 3)]], 1, "one");
        let refs: References = [("one".to_string(), ReferenceMakespan::Exact { optimum: 8 })].into();
        let rep = evaluate(&[Policy::Rule(Rule::Spt)], &[inst], &refs, EvalOptions::default()).unwrap();
        assert_eq!(rep.rows.len(), 1);
        assert_eq!(rep.rows[0].relative_error, 0.0);
        let all = &rep.aggregates[0];
        assert_eq!((all.group.as_str(), all.count, all.mean_error, all.std_error), ("all", 1, 0.0, 0.0));
    }

    #[test]
    fn missing_reference_and_bounds() {
        let inst = named(&[vec![(0, 5)], vec![(0, 3)]], 1, "x1");
        let err = evaluate(&[Policy::Rule(Rule::Fifo)], &[inst.clone()], &References::new(), EvalOptions::default());
        assert!(matches!(err, Err(EvalError::MissingReference(n)) if n == "x1"));
        let refs: References = [("x1".to_string(), ReferenceMakespan::Bounds { lb: 6, ub: 10 })].into();
        let rep = evaluate(&[Policy::Rule(Rule::Fifo)], &[inst], &refs, EvalOptions::default()).unwrap();
        assert!(!rep.rows[0].reference_exact);
        assert_eq!(rep.rows[0].relative_error, 0.0);
    }

    #[test]
    fn policy_specs_and_families() {
        assert_eq!("spt".parse::<PolicySpec>().unwrap(), PolicySpec::Rule(Rule::Spt));
        assert_eq!("gnn:a/b.ckpt".parse::<PolicySpec>().unwrap(), PolicySpec::Gnn("a/b.ckpt".into()));
        assert!("nope".parse::<PolicySpec>().is_err());
        assert_eq!(family_of("TA21"), "ta");
        assert_eq!(family_of("42"), "other");
    }
}
