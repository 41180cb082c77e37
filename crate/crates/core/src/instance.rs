//! Static job-shop problems and random instance generators.
//!
//! A [`JsspInstance`] has `n` jobs, each visiting all `m` machines exactly once
//! in a fixed route. Operations are addressed either by `(job, step)` or by a
//! flat id `job * m + step`.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Integer time unit used for processing times, clocks and makespans.
pub type Time = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Operation {
    pub job_id: usize,
    pub step_index: usize,
    pub machine_id: usize,
    pub processing_time: Time,
}

/// A job's operations in precedence order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Job {
    pub operations: Vec<Operation>,
}

impl Job {
    pub fn total_time(&self) -> u64 {
        self.operations.iter().map(|o| o.processing_time as u64).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JsspInstance {
    pub num_machines: usize,
    pub num_jobs: usize,
    pub jobs: Vec<Job>,
    pub name: Option<String>,
}

/// One broken instance invariant, located by job and step where relevant.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Violation {
    #[error("instance has no jobs or no machines")]
    Empty,
    #[error("declared {declared} jobs but found {found}")]
    JobCountMismatch { declared: usize, found: usize },
    #[error("job {job}: expected {expected} operations, found {found}")]
    WrongOperationCount { job: usize, expected: usize, found: usize },
    #[error("job {job} step {step}: machine {machine} out of range 0..{num_machines}")]
    MachineIdOutOfRange { job: usize, step: usize, machine: usize, num_machines: usize },
    #[error("job {job}: machines are not a permutation of 0..m")]
    NonPermutationMachines { job: usize },
    #[error("job {job} step {step}: processing time must be at least 1")]
    NonPositiveTime { job: usize, step: usize },
    #[error("job {job} step {step}: operation carries inconsistent job/step index")]
    InconsistentIndex { job: usize, step: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InstanceError {
    #[error("invalid instance: {0}")]
    Invalid(Violation),
    #[error("empty range for {what}: [{low}, {high}]")]
    EmptyRange { what: &'static str, low: u64, high: u64 },
}

impl From<Violation> for InstanceError {
    fn from(v: Violation) -> Self {
        InstanceError::Invalid(v)
    }
}

impl JsspInstance {
    /// Builds an instance from per-job routes of `(machine, processing_time)`
    /// pairs and checks every invariant.
    pub fn from_routes(
        num_machines: usize,
        routes: &[Vec<(usize, Time)>],
        name: Option<String>,
    ) -> Result<Self, InstanceError> {
        let jobs = routes
            .iter()
            .enumerate()
            .map(|(job_id, route)| Job {
                operations: route
                    .iter()
                    .enumerate()
                    .map(|(step_index, &(machine_id, processing_time))| Operation {
                        job_id,
                        step_index,
                        machine_id,
                        processing_time,
                    })
                    .collect(),
            })
            .collect();
        let instance = JsspInstance { num_machines, num_jobs: routes.len(), jobs, name };
        match validate(&instance).into_iter().next() {
            Some(v) => Err(v.into()),
            None => Ok(instance),
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn num_operations(&self) -> usize {
        self.num_jobs * self.num_machines
    }

    #[inline]
    pub fn op_id(&self, job: usize, step: usize) -> usize {
        job * self.num_machines + step
    }

    #[inline]
    pub fn operation(&self, op: usize) -> &Operation {
        &self.jobs[op / self.num_machines].operations[op % self.num_machines]
    }

    pub fn operations(&self) -> impl Iterator<Item = &Operation> + '_ {
        self.jobs.iter().flat_map(|j| j.operations.iter())
    }

    pub fn max_processing_time(&self) -> Time {
        self.operations().map(|o| o.processing_time).max().unwrap_or(0)
    }

    /// Total processing time routed through each machine.
    pub fn machine_loads(&self) -> Vec<u64> {
        let mut loads = alloc::vec![0u64; self.num_machines];
        for op in self.operations() {
            loads[op.machine_id] += op.processing_time as u64;
        }
        loads
    }

    /// `max(longest job, busiest machine)`, a valid makespan lower bound.
    pub fn trivial_lower_bound(&self) -> u64 {
        let job = self.jobs.iter().map(Job::total_time).max().unwrap_or(0);
        let machine = self.machine_loads().into_iter().max().unwrap_or(0);
        job.max(machine)
    }

    /// Returns a copy with every processing time multiplied by `factor`.
    pub fn scaled(&self, factor: Time) -> JsspInstance {
        let mut out = self.clone();
        for job in &mut out.jobs {
            for op in &mut job.operations {
                op.processing_time *= factor;
            }
        }
        out
    }
}

/// Lists every invariant violation; empty iff the instance is valid.
pub fn validate(instance: &JsspInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    let m = instance.num_machines;
    if m == 0 || instance.num_jobs == 0 {
        out.push(Violation::Empty);
    }
    if instance.jobs.len() != instance.num_jobs {
        out.push(Violation::JobCountMismatch {
            declared: instance.num_jobs,
            found: instance.jobs.len(),
        });
    }
    for (j, job) in instance.jobs.iter().enumerate() {
        if job.operations.len() != m {
            out.push(Violation::WrongOperationCount {
                job: j,
                expected: m,
                found: job.operations.len(),
            });
        }
        let mut seen = alloc::vec![false; m];
        let mut permutation = job.operations.len() == m;
        for (s, op) in job.operations.iter().enumerate() {
            if op.job_id != j || op.step_index != s {
                out.push(Violation::InconsistentIndex { job: j, step: s });
            }
            if op.machine_id >= m {
                out.push(Violation::MachineIdOutOfRange {
                    job: j,
                    step: s,
                    machine: op.machine_id,
                    num_machines: m,
                });
                permutation = false;
            } else if seen[op.machine_id] {
                permutation = false;
            } else {
                seen[op.machine_id] = true;
            }
            if op.processing_time == 0 {
                out.push(Violation::NonPositiveTime { job: j, step: s });
            }
        }
        let in_range = job.operations.iter().all(|o| o.machine_id < m);
        if in_range && !permutation {
            out.push(Violation::NonPermutationMachines { job: j });
        }
    }
    out
}

/// Closed integer interval `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub low: u32,
    pub high: u32,
}

impl Interval {
    pub const fn new(low: u32, high: u32) -> Self {
        Interval { low, high }
    }

    pub const fn point(v: u32) -> Self {
        Interval { low: v, high: v }
    }

    fn check(&self, what: &'static str) -> Result<(), InstanceError> {
        if self.low == 0 || self.low > self.high {
            return Err(InstanceError::EmptyRange {
                what,
                low: self.low as u64,
                high: self.high as u64,
            });
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> u32 {
        rng.gen_range(self.low..=self.high)
    }

    pub fn contains(&self, v: u32) -> bool {
        self.low <= v && v <= self.high
    }
}

/// Parameters of the random training distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub machine_range: Interval,
    pub job_range: Interval,
    pub time_range: Interval,
    /// Raise the lower job bound to the drawn machine count.
    pub jobs_at_least_machines: bool,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            machine_range: Interval::new(5, 9),
            job_range: Interval::new(1, 9),
            time_range: Interval::new(1, 99),
            jobs_at_least_machines: true,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        self.machine_range.check("machine_range")?;
        self.job_range.check("job_range")?;
        self.time_range.check("time_range")
    }
}

fn random_routes(
    rng: &mut ChaCha8Rng,
    m: usize,
    n: usize,
    times: Interval,
) -> alloc::vec::Vec<Vec<(usize, Time)>> {
    (0..n)
        .map(|_| {
            let mut machines: Vec<usize> = (0..m).collect();
            machines.shuffle(rng);
            machines.into_iter().map(|k| (k, times.sample(rng))).collect()
        })
        .collect()
}

/// Draws one instance from the training distribution.
pub fn generate_training(config: &GeneratorConfig) -> Result<JsspInstance, InstanceError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let m = config.machine_range.sample(&mut rng) as usize;
    let low = if config.jobs_at_least_machines {
        config.job_range.low.max(m as u32)
    } else {
        config.job_range.low
    };
    if config.job_range.high < low {
        return Err(InstanceError::EmptyRange {
            what: "job_range",
            low: low as u64,
            high: config.job_range.high as u64,
        });
    }
    let n = Interval::new(low, config.job_range.high).sample(&mut rng) as usize;
    let routes = random_routes(&mut rng, m, n, config.time_range);
    JsspInstance::from_routes(m, &routes, None)
}

/// Taillard-style instance: machine routes come from a forward swap pass
/// (step `i` swaps with a uniformly chosen step in `i..m`). `None` sizes
/// are drawn from `U[15,20]` machines and `U[15,100]` jobs.
pub fn generate_taillard(
    seed: u64,
    m: Option<usize>,
    n: Option<usize>,
    time_range: Option<Interval>,
) -> Result<JsspInstance, InstanceError> {
    let times = time_range.unwrap_or(Interval::new(1, 99));
    times.check("time_range")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = m.unwrap_or_else(|| rng.gen_range(15..=20));
    let n = n.unwrap_or_else(|| rng.gen_range(15..=100));
    check_size(m, n)?;
    let mut routes = Vec::with_capacity(n);
    for _ in 0..n {
        let mut machines: Vec<usize> = (0..m).collect();
        for i in 0..m {
            let j = rng.gen_range(i..m);
            machines.swap(i, j);
        }
        routes.push(machines.into_iter().map(|k| (k, times.sample(&mut rng))).collect());
    }
    JsspInstance::from_routes(m, &routes, None)
}

/// Uniform random machine permutations with i.i.d. uniform times.
pub fn generate_uniform_benchmark(
    seed: u64,
    m: usize,
    n: usize,
    time_range: Interval,
) -> Result<JsspInstance, InstanceError> {
    time_range.check("time_range")?;
    check_size(m, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let routes = random_routes(&mut rng, m, n, time_range);
    JsspInstance::from_routes(m, &routes, None)
}

fn check_size(m: usize, n: usize) -> Result<(), InstanceError> {
    if m == 0 {
        return Err(InstanceError::EmptyRange { what: "machines", low: 1, high: 0 });
    }
    if n == 0 {
        return Err(InstanceError::EmptyRange { what: "jobs", low: 1, high: 0 });
    }
    Ok(())
}

/// Benchmark families whose generating distribution is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkPreset {
    Abz5,
    Abz6,
    Abz7To9,
    Yn,
    Taillard,
}

impl BenchmarkPreset {
    pub fn time_range(self) -> Interval {
        match self {
            BenchmarkPreset::Abz5 => Interval::new(50, 100),
            BenchmarkPreset::Abz6 => Interval::new(25, 100),
            BenchmarkPreset::Abz7To9 => Interval::new(11, 40),
            BenchmarkPreset::Yn => Interval::new(10, 50),
            BenchmarkPreset::Taillard => Interval::new(1, 99),
        }
    }

    /// Default `(machines, jobs)` of the published family.
    pub fn default_size(self) -> (usize, usize) {
        match self {
            BenchmarkPreset::Abz5 | BenchmarkPreset::Abz6 => (10, 10),
            BenchmarkPreset::Abz7To9 => (15, 20),
            BenchmarkPreset::Yn => (20, 20),
            BenchmarkPreset::Taillard => (15, 15),
        }
    }

    pub fn generate(self, seed: u64, m: usize, n: usize) -> Result<JsspInstance, InstanceError> {
        match self {
            BenchmarkPreset::Taillard => {
                generate_taillard(seed, Some(m), Some(n), Some(self.time_range()))
            }
            _ => generate_uniform_benchmark(seed, m, n, self.time_range()),
        }
    }
}
