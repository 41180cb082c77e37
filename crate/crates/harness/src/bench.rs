//! Wall-clock cost of scheduling as instance size grows.

use std::sync::Arc;
use std::time::Instant;

use jssp_core::agent::DecodeMode;
use jssp_core::instance::{generate_uniform_benchmark, InstanceError, Interval};
use jssp_core::metrics::summarize;
use serde::{Deserialize, Serialize};

use crate::eval::{EvalError, Policy};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub policy: String,
    pub machines: usize,
    pub jobs: usize,
    pub repetitions: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub mean_makespan: f64,
}

/// Times each policy on `repetitions` random instances per `(machines, jobs)`
/// size, processing times `U[1, 99]`. Instance `r` of a size uses seed
/// `seed + r`, so all policies see the same instances.
pub fn bench(
    policies: &[Policy<'_>],
    sizes: &[(usize, usize)],
    repetitions: usize,
    seed: u64,
) -> Result<Vec<BenchRow>, BenchError> {
    let mut rows = Vec::new();
    for &(m, n) in sizes {
        let instances: Vec<Arc<_>> = (0..repetitions as u64)
            .map(|r| generate_uniform_benchmark(seed.wrapping_add(r), m, n, Interval::new(1, 99)).map(Arc::new))
            .collect::<Result<_, _>>()?;
        for p in policies {
            let mut times = Vec::with_capacity(repetitions);
            let mut spans = Vec::with_capacity(repetitions);
            for (r, inst) in instances.iter().enumerate() {
                let t = Instant::now();
                let (_, makespan) = p.run(inst.clone(), seed.wrapping_add(r as u64), DecodeMode::Sample)?;
                times.push(t.elapsed().as_secs_f64() * 1e3);
                spans.push(makespan as f64);
            }
            let s = summarize(&times);
            rows.push(BenchRow {
                policy: p.id(),
                machines: m,
                jobs: n,
                repetitions,
                mean_ms: s.mean,
                std_ms: s.std,
                mean_makespan: summarize(&spans).mean,
            });
        }
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("policy,machines,jobs,repetitions,mean_ms,std_ms,mean_makespan\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{:.4},{:.4},{:.2}\n",
            r.policy, r.machines, r.jobs, r.repetitions, r.mean_ms, r.std_ms, r.mean_makespan
        ));
    }
    s
}
