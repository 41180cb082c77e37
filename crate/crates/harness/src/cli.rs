//! The `jssp` command line. Machine-readable results go to `out`, progress
//! and diagnostics to `err`. Exit codes: 0 success, 1 data error, 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jssp_core::agent::{DecodeMode, ModelConfig, ParameterSet};
use jssp_core::instance::{
    generate_taillard, generate_training, validate, BenchmarkPreset, GeneratorConfig, Interval,
};
use jssp_core::oracle::{solve, OracleResult, DEFAULT_NODE_BUDGET};
use jssp_core::pdr::Rule;
use jssp_core::ppo::PpoConfig;
use jssp_core::simulator::verify_schedule;
use jssp_core::JsspInstance;
use serde_json::json;

use crate::bench::{bench, bench_csv};
use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::eval::{evaluate, EvalOptions, Policy, PolicySpec};
use crate::format::ParseOptions;
use crate::io::{
    load_instance, load_instances, load_references, save_instance, save_references, schedule_csv, write_file,
    References,
};
use crate::training::{draw_instances, reference_of, solve_references, train_logged, validation_set};

#[derive(Debug, Parser)]
#[command(name = "jssp", version, about = "Learned and classical dispatching for job-shop scheduling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Copy)]
struct Common {
    /// Seed for every random choice the command makes.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Machine ids in text instance files start at 1.
    #[arg(long)]
    one_based: bool,
    /// Reject trailing tokens and lines in text instance files.
    #[arg(long)]
    strict: bool,
}

impl Common {
    fn parse_options(&self) -> ParseOptions {
        ParseOptions { one_based: self.one_based, strict: self.strict }
    }
}

/// `low-high` or a single value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Range(Interval);

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |t: &str| t.trim().parse::<u32>().map_err(|_| format!("`{t}` is not a non-negative integer"));
        let (low, high) = match s.split_once('-') {
            Some((a, b)) => (num(a)?, num(b)?),
            None => {
                let v = num(s)?;
                (v, v)
            }
        };
        if low == 0 || low > high {
            return Err(format!("`{s}` is not a range of positive integers"));
        }
        Ok(Range(Interval::new(low, high)))
    }
}

/// `<jobs>x<machines>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Size {
    jobs: usize,
    machines: usize,
}

impl FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("`{s}` is not a size <jobs>x<machines>");
        let (n, m) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let jobs: usize = n.trim().parse().map_err(|_| bad())?;
        let machines: usize = m.trim().parse().map_err(|_| bad())?;
        if jobs == 0 || machines == 0 {
            return Err(bad());
        }
        Ok(Size { jobs, machines })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    /// The training distribution (ranges of machines, jobs and times).
    Training,
    Taillard,
    /// Uniform machine permutations.
    Uniform,
    Abz5,
    Abz6,
    Abz7,
    Yn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FileFormat {
    Txt,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write random instances to a directory.
    Generate(GenerateArgs),
    /// Train the graph policy with PPO and write a checkpoint.
    Train(TrainArgs),
    /// Schedule one instance with one policy; prints the schedule CSV and the makespan.
    Solve(SolveArgs),
    /// Evaluate policies against reference makespans.
    Evaluate(EvaluateArgs),
    /// Solve an instance exactly with branch-and-bound.
    Oracle(OracleArgs),
    /// Time policies over a grid of instance sizes.
    Bench(BenchArgs),
    /// Check an instance file and list every violation.
    ValidateInstance(ValidateArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Kind::Training)]
    kind: Kind,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Machines; a range only for `training`.
    #[arg(long)]
    machines: Option<Range>,
    /// Jobs; a range only for `training`.
    #[arg(long)]
    jobs: Option<Range>,
    /// Processing-time range.
    #[arg(long)]
    times: Option<Range>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = FileFormat::Txt)]
    format: FileFormat,
    /// File and instance name prefix; defaults to the kind.
    #[arg(long)]
    prefix: Option<String>,
    /// Also solve every instance with the oracle and write a references file here.
    #[arg(long)]
    references: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    budget: u64,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Checkpoint to write.
    #[arg(long)]
    out: PathBuf,
    /// JSON-lines training log; stdout when omitted.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Base configuration as JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    max_updates: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    machines: Option<Range>,
    #[arg(long)]
    jobs: Option<Range>,
    #[arg(long)]
    times: Option<Range>,
    /// Oracle-solved validation instances drawn from the training distribution.
    #[arg(long, default_value_t = 0)]
    validation: usize,
    #[arg(long)]
    validate_every: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    budget: u64,
    /// Record zero wall time so equal seeds give identical logs.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("policy").required(true).args(["rule", "checkpoint"]))]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    rule: Option<Rule>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Pick the most probable operation instead of sampling.
    #[arg(long)]
    greedy: bool,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    /// A rule name or `gnn:<checkpoint>`; repeatable.
    #[arg(long = "policy", required = true)]
    policies: Vec<PolicySpec>,
    /// An instance file or a directory of them.
    #[arg(long)]
    instances: PathBuf,
    /// References JSON; the oracle solves every instance when omitted.
    #[arg(long)]
    refs: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    budget: u64,
    /// Rollouts per instance for stochastic policies; the best is reported.
    #[arg(long, default_value_t = 1)]
    rollouts: usize,
    #[arg(long)]
    greedy: bool,
    /// Report JSON; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-instance rows as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    no_timing: bool,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    budget: u64,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// Policies to time; MOR, SPT and FIFO when omitted.
    #[arg(long = "policy")]
    policies: Vec<PolicySpec>,
    /// Also time this checkpoint.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Sizes as `<jobs>x<machines>`, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "10x10,15x15,20x15,30x15")]
    sizes: Vec<Size>,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    instance: PathBuf,
}

/// A failed command, by category.
#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Data(#[from] anyhow::Error),
}

fn data<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Data(e.into())
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a, out, err),
        Command::Train(a) => train(a, out, err),
        Command::Solve(a) => solve_one(a, out),
        Command::Evaluate(a) => evaluate_cmd(a, out, err),
        Command::Oracle(a) => oracle(a, out),
        Command::Bench(a) => bench_cmd(a, out, err),
        Command::ValidateInstance(a) => validate_instance(a, out),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
        Err(CliError::Data(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
    }
}

fn fixed(what: &str, r: Option<Range>, default: usize) -> Result<usize, CliError> {
    match r {
        None => Ok(default),
        Some(Range(i)) if i.low == i.high => Ok(i.low as usize),
        Some(_) => Err(CliError::Usage(format!("--{what} takes a single value for this kind"))),
    }
}

fn generate(a: GenerateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let prefix = a.prefix.clone().unwrap_or_else(|| format!("{:?}", a.kind).to_ascii_lowercase());
    let preset = match a.kind {
        Kind::Training | Kind::Uniform => None,
        Kind::Taillard => Some(BenchmarkPreset::Taillard),
        Kind::Abz5 => Some(BenchmarkPreset::Abz5),
        Kind::Abz6 => Some(BenchmarkPreset::Abz6),
        Kind::Abz7 => Some(BenchmarkPreset::Abz7To9),
        Kind::Yn => Some(BenchmarkPreset::Yn),
    };
    let (dm, dn) = preset.map_or((10, 10), |p| p.default_size());
    let (m, n) = if a.kind == Kind::Training {
        (0, 0)
    } else {
        (fixed("machines", a.machines, dm)?, fixed("jobs", a.jobs, dn)?)
    };
    let times = a.times.map(|r| r.0);
    fs::create_dir_all(&a.out).map_err(|e| data(anyhow::anyhow!("{}: {e}", a.out.display())))?;
    let width = a.count.saturating_sub(1).to_string().len();
    let ext = match a.format {
        FileFormat::Txt => "txt",
        FileFormat::Json => "json",
    };
    let mut generated = Vec::with_capacity(a.count);
    for i in 0..a.count {
        let seed = a.common.seed.wrapping_add(i as u64);
        let inst = match (a.kind, preset) {
            (Kind::Training, _) => {
                let d = GeneratorConfig::default();
                let cfg = GeneratorConfig {
                    machine_range: a.machines.map_or(d.machine_range, |r| r.0),
                    job_range: a.jobs.map_or(d.job_range, |r| r.0),
                    time_range: times.unwrap_or(d.time_range),
                    jobs_at_least_machines: a.jobs.is_none(),
                    seed,
                };
                generate_training(&cfg)
            }
            (Kind::Taillard, _) => generate_taillard(seed, Some(m), Some(n), times),
            (_, Some(p)) => match times {
                Some(t) => jssp_core::instance::generate_uniform_benchmark(seed, m, n, t),
                None => p.generate(seed, m, n),
            },
            (_, None) => jssp_core::instance::generate_uniform_benchmark(seed, m, n, times.unwrap_or(Interval::new(1, 99))),
        }
        .map_err(|e| CliError::Usage(e.to_string()))?;
        let name = format!("{prefix}{i:0width$}");
        let path = a.out.join(format!("{name}.{ext}"));
        save_instance(&path, &inst.clone().with_name(name)).map_err(data)?;
        writeln!(out, "{}", path.display()).map_err(data)?;
        generated.push(Arc::new(inst));
    }
    if let Some(refs_path) = &a.references {
        let mut refs = References::new();
        for (i, inst) in generated.iter().enumerate() {
            let report = solve(inst, a.budget);
            let _ = writeln!(err, "oracle {prefix}{i:0width$}: {:?} after {} nodes", report.result, report.nodes);
            refs.insert(format!("{prefix}{i:0width$}"), reference_of(report.result).map_err(data)?);
        }
        save_references(refs_path, &refs).map_err(data)?;
    }
    Ok(0)
}

fn train(a: TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| data(anyhow::anyhow!("{}: {e}", p.display())))?;
            serde_json::from_str::<PpoConfig>(&text).map_err(|e| data(anyhow::anyhow!("{}: {e}", p.display())))?
        }
        None => PpoConfig::default(),
    };
    if let Some(v) = a.max_updates {
        cfg.max_updates = v;
    }
    if let Some(v) = a.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.episodes {
        cfg.episodes_per_update = v;
    }
    if let Some(v) = a.hidden {
        cfg.model = ModelConfig { hidden: v, ..cfg.model };
    }
    if let Some(r) = a.machines {
        cfg.generator.machine_range = r.0;
    }
    if let Some(r) = a.jobs {
        cfg.generator.job_range = r.0;
    }
    if let Some(r) = a.times {
        cfg.generator.time_range = r.0;
    }
    if let Some(v) = a.validate_every {
        cfg.validate_every = v;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let validation = if a.validation > 0 {
        // Validation instances come from a seed stream disjoint from the trainer's.
        let insts = draw_instances(&cfg.generator, a.validation, a.common.seed ^ 0x5a5a_5a5a_5a5a_5a5a).map_err(data)?;
        let started = Instant::now();
        let refs = solve_references(&insts, a.budget).map_err(data)?;
        let _ = writeln!(err, "solved {} validation instances in {:?}", insts.len(), started.elapsed());
        Some(validation_set(insts, &refs))
    } else {
        None
    };
    let trainer = match &a.log {
        Some(p) => {
            let mut f = fs::File::create(p).map_err(|e| data(anyhow::anyhow!("{}: {e}", p.display())))?;
            train_logged(cfg, a.common.seed, validation.as_ref(), !a.no_timing, &mut f)
        }
        None => train_logged(cfg, a.common.seed, validation.as_ref(), !a.no_timing, out),
    }
    .map_err(data)?;
    save_checkpoint(&a.out, &crate::training::checkpoint_of(&trainer, a.common.seed)).map_err(data)?;
    let _ = writeln!(
        err,
        "{} updates{}, checkpoint written to {}",
        trainer.updates(),
        if trainer.converged() { " (converged)" } else { "" },
        a.out.display()
    );
    Ok(0)
}

fn load_params(path: &Path) -> Result<ParameterSet, CliError> {
    Ok(load_checkpoint(path).map_err(|e| data(anyhow::anyhow!("{}: {e}", path.display())))?.params)
}

fn mode(greedy: bool) -> DecodeMode {
    if greedy {
        DecodeMode::Greedy
    } else {
        DecodeMode::Sample
    }
}

fn solve_one(a: SolveArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let inst = Arc::new(load_instance(&a.instance, a.common.parse_options()).map_err(data)?);
    let params;
    let policy = match (&a.rule, &a.checkpoint) {
        (Some(r), _) => Policy::Rule(*r),
        (None, Some(p)) => {
            params = load_params(p)?;
            Policy::Gnn { id: format!("gnn:{}", p.display()), params: &params }
        }
        (None, None) => unreachable!("clap requires one policy"),
    };
    let (schedule, makespan) = policy.run(inst.clone(), a.common.seed, mode(a.greedy)).map_err(data)?;
    verify_schedule(&inst, &schedule).map_err(data)?;
    write!(out, "{}makespan={makespan}\n", schedule_csv(&schedule)).map_err(data)?;
    Ok(0)
}

fn evaluate_cmd(a: EvaluateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let instances: Vec<Arc<JsspInstance>> = load_instances(&a.instances, a.common.parse_options())
        .map_err(data)?
        .into_iter()
        .map(Arc::new)
        .collect();
    let refs = match &a.refs {
        Some(p) => load_references(p).map_err(data)?,
        None => {
            let solved = solve_references(&instances, a.budget).map_err(data)?;
            instances.iter().zip(solved).map(|(i, r)| (i.name.clone().unwrap_or_default(), r)).collect()
        }
    };
    let mut loaded = Vec::new();
    for spec in &a.policies {
        if let PolicySpec::Gnn(p) = spec {
            loaded.push(load_params(Path::new(p))?);
        }
    }
    let mut params = loaded.iter();
    let policies: Vec<Policy<'_>> = a
        .policies
        .iter()
        .map(|spec| match spec {
            PolicySpec::Rule(r) => Policy::Rule(*r),
            PolicySpec::Gnn(_) => Policy::Gnn { id: spec.to_string(), params: params.next().expect("loaded above") },
        })
        .collect();
    let opts = EvalOptions { seed: a.common.seed, rollouts: a.rollouts, mode: mode(a.greedy), timing: !a.no_timing };
    let report = evaluate(&policies, &instances, &refs, opts).map_err(data)?;
    for agg in report.aggregates.iter().filter(|g| g.group == "all") {
        let _ = writeln!(err, "{:>24}  mean error {:7.2}%  std {:6.2}  n={}", agg.policy, agg.mean_error, agg.std_error, agg.count);
    }
    if report.rollouts > 1 {
        let _ = writeln!(err, "stochastic policies report the best of {} rollouts", report.rollouts);
    }
    let body = serde_json::to_string_pretty(&report).map_err(data)?;
    match &a.out {
        Some(p) => write_file(p, body + "\n").map_err(data)?,
        None => writeln!(out, "{body}").map_err(data)?,
    }
    if let Some(p) = &a.csv {
        write_file(p, report.rows_csv()).map_err(data)?;
    }
    Ok(0)
}

fn oracle(a: OracleArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let inst = load_instance(&a.instance, a.common.parse_options()).map_err(data)?;
    let started = Instant::now();
    let report = solve(&inst, a.budget);
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    let mut v = json!({ "instance": inst.name, "nodes": report.nodes, "wall_ms": wall_ms });
    match report.result {
        OracleResult::Exact { value } => {
            v["status"] = json!("exact");
            v["value"] = json!(value);
        }
        OracleResult::Bounds { lb, ub } => {
            v["status"] = json!("bounds");
            v["bounds"] = json!({ "lb": lb, "ub": ub });
        }
    }
    writeln!(out, "{v}").map_err(data)?;
    Ok(0)
}

fn bench_cmd(a: BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let mut specs = a.policies.clone();
    if specs.is_empty() {
        specs = vec![PolicySpec::Rule(Rule::Mor), PolicySpec::Rule(Rule::Spt), PolicySpec::Rule(Rule::Fifo)];
    }
    if let Some(p) = &a.checkpoint {
        specs.insert(0, PolicySpec::Gnn(p.display().to_string()));
    }
    let loaded: Vec<ParameterSet> = specs
        .iter()
        .filter_map(|s| match s {
            PolicySpec::Gnn(p) => Some(load_params(Path::new(p))),
            PolicySpec::Rule(_) => None,
        })
        .collect::<Result<_, _>>()?;
    let mut params = loaded.iter();
    let policies: Vec<Policy<'_>> = specs
        .iter()
        .map(|s| match s {
            PolicySpec::Rule(r) => Policy::Rule(*r),
            PolicySpec::Gnn(_) => Policy::Gnn { id: s.to_string(), params: params.next().expect("loaded above") },
        })
        .collect();
    let sizes: Vec<(usize, usize)> = a.sizes.iter().map(|s| (s.machines, s.jobs)).collect();
    let rows = bench(&policies, &sizes, a.reps, a.common.seed).map_err(data)?;
    for r in &rows {
        let _ = writeln!(err, "{:>24} {:>3}x{:<3} {:10.3} ms", r.policy, r.jobs, r.machines, r.mean_ms);
    }
    match &a.out {
        Some(p) => write_file(p, bench_csv(&rows)).map_err(data)?,
        None => write!(out, "{}", bench_csv(&rows)).map_err(data)?,
    }
    Ok(0)
}

fn validate_instance(a: ValidateArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let path = a.instance.display().to_string();
    let violations: Vec<String> = match load_instance(&a.instance, a.common.parse_options()) {
        Ok(inst) => validate(&inst).iter().map(ToString::to_string).collect(),
        Err(crate::io::IoError::Io { source, .. }) => return Err(data(anyhow::anyhow!("{path}: {source}"))),
        Err(e) => vec![e.to_string()],
    };
    let valid = violations.is_empty();
    writeln!(out, "{}", json!({ "instance": path, "valid": valid, "violations": violations })).map_err(data)?;
    Ok(if valid { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_sizes() {
        assert_eq!("3-5".parse::<Range>().unwrap(), Range(Interval::new(3, 5)));
        assert_eq!("7".parse::<Range>().unwrap(), Range(Interval::point(7)));
        assert!("5-3".parse::<Range>().is_err());
        assert!("0".parse::<Range>().is_err());
        assert_eq!("20x15".parse::<Size>().unwrap(), Size { jobs: 20, machines: 15 });
        assert!("20by15".parse::<Size>().is_err());
    }

    #[test]
    fn command_definitions_are_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
