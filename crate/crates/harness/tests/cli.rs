use std::fs;
use std::path::Path;

use jssp_harness::checkpoint::file_digest;
use serde_json::Value;

struct Output {
    code: i32,
    out: String,
    err: String,
}

fn jssp(args: &[&str]) -> Output {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = jssp_harness::cli::run(std::iter::once("jssp").chain(args.iter().copied()), &mut out, &mut err);
    Output { code, out: String::from_utf8(out).unwrap(), err: String::from_utf8(err).unwrap() }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const TWO_BY_TWO: &str = "2 2\n0 3 1 2\n1 4 0 6\n";

/// Trains a deliberately tiny policy so the CLI paths run in well under a second.
fn tiny_checkpoint(dir: &Path, seed: &str) -> (std::path::PathBuf, std::path::PathBuf) {
    let ckpt = dir.join(format!("tiny{seed}.ckpt"));
    let log = dir.join(format!("tiny{seed}.jsonl"));
    let o = jssp(&[
        "train", "--out", p(&ckpt), "--log", p(&log), "--seed", seed, "--hidden", "8", "--max-updates", "2",
        "--episodes", "2", "--machines", "2-3", "--jobs", "2-3", "--validation", "3", "--no-timing",
    ]);
    assert_eq!(o.code, 0, "{}", o.err);
    (ckpt, log)
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(jssp(&[]).code, 2);
    assert_eq!(jssp(&["frobnicate"]).code, 2);
    assert_eq!(jssp(&["solve", "--instance", "x.txt"]).code, 2, "a policy is required");
    assert_eq!(jssp(&["solve", "--instance", "x.txt", "--rule", "nope"]).code, 2);
    assert_eq!(jssp(&["evaluate", "--policy", "bogus", "--instances", "."]).code, 2);
    assert_eq!(jssp(&["generate", "--out", ".", "--machines", "5-3"]).code, 2);
    assert_eq!(jssp(&["bench", "--sizes", "10by10"]).code, 2);
    let help = jssp(&["--help"]);
    assert_eq!(help.code, 0);
    for sub in ["generate", "train", "solve", "evaluate", "oracle", "bench", "validate-instance"] {
        assert!(help.out.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn solve_prints_schedule_and_makespan() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f.txt");
    fs::write(&f, TWO_BY_TWO).unwrap();
    let o = jssp(&["solve", "--rule", "spt", "--instance", p(&f), "--seed", "1"]);
    assert_eq!(o.code, 0, "{}", o.err);
    let lines: Vec<&str> = o.out.lines().collect();
    assert_eq!(lines[0], "job,step,machine,start,finish");
    assert_eq!(lines.len(), 1 + 4 + 1);
    let makespan: u64 = lines[5].strip_prefix("makespan=").unwrap().parse().unwrap();
    let finish = lines[1..5].iter().map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap()).max().unwrap();
    assert_eq!(makespan, finish);

    assert_eq!(jssp(&["solve", "--rule", "spt", "--instance", p(&dir.path().join("missing.txt"))]).code, 1);
}

#[test]
fn oracle_reports_exact_json() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("tiny.txt");
    fs::write(&f, "1 3\n0 2 1 3 2 4\n").unwrap();
    let o = jssp(&["oracle", "--instance", p(&f)]);
    assert_eq!(o.code, 0, "{}", o.err);
    let v: Value = serde_json::from_str(&o.out).unwrap();
    assert_eq!(v["status"], "exact");
    assert_eq!(v["value"], 9);
    assert_eq!(v["instance"], "tiny");
    assert!(v["nodes"].is_u64() && v["wall_ms"].is_number());

    let budget = jssp(&["oracle", "--instance", p(&f), "--budget", "0"]);
    let v: Value = serde_json::from_str(&budget.out).unwrap();
    assert_eq!(v["status"], "bounds");
    assert!(v["bounds"]["lb"].as_u64().unwrap() <= v["bounds"]["ub"].as_u64().unwrap());
}

#[test]
fn validate_instance_lists_violations() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.txt");
    let bad = dir.path().join("bad.txt");
    fs::write(&good, TWO_BY_TWO).unwrap();
    fs::write(&bad, "2 2\n0 3 0 2\n1 4 0 6\n").unwrap();
    let o = jssp(&["validate-instance", "--instance", p(&good)]);
    assert_eq!(o.code, 0);
    assert_eq!(serde_json::from_str::<Value>(&o.out).unwrap()["valid"], true);
    let o = jssp(&["validate-instance", "--instance", p(&bad)]);
    assert_eq!(o.code, 1);
    let v: Value = serde_json::from_str(&o.out).unwrap();
    assert_eq!(v["valid"], false);
    assert!(v["violations"][0].as_str().unwrap().contains("job 0"));

    let one_based = dir.path().join("ob.txt");
    fs::write(&one_based, "1 2\n1 3 2 4\n").unwrap();
    assert_eq!(jssp(&["validate-instance", "--instance", p(&one_based)]).code, 1);
    assert_eq!(jssp(&["validate-instance", "--instance", p(&one_based), "--one-based"]).code, 0);
    assert_eq!(jssp(&["validate-instance", "--instance", p(&dir.path().join("nope"))]).code, 1);
}

#[test]
fn generate_then_evaluate_rules() {
    let dir = tempfile::tempdir().unwrap();
    let set = dir.path().join("set");
    let refs = dir.path().join("refs.json");
    let o = jssp(&[
        "generate", "--count", "4", "--machines", "3", "--jobs", "3-4", "--out", p(&set), "--references", p(&refs),
        "--seed", "11",
    ]);
    assert_eq!(o.code, 0, "{}", o.err);
    assert_eq!(o.out.lines().count(), 4);
    let refs_json: Value = serde_json::from_str(&fs::read_to_string(&refs).unwrap()).unwrap();
    assert_eq!(refs_json.as_object().unwrap().len(), 4);
    assert!(refs_json["training0"]["optimum"].is_u64());

    let report = dir.path().join("report.json");
    let csv = dir.path().join("rows.csv");
    let o = jssp(&[
        "evaluate", "--policy", "mor", "--policy", "random", "--instances", p(&set), "--refs", p(&refs), "--out",
        p(&report), "--csv", p(&csv),
    ]);
    assert_eq!(o.code, 0, "{}", o.err);
    let v: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 8);
    for row in v["rows"].as_array().unwrap() {
        assert!(row["relative_error"].as_f64().unwrap() >= 0.0, "optima are exact");
    }
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 9);

    // Without a references file the oracle supplies them; the report matches.
    let o = jssp(&["evaluate", "--policy", "mor", "--instances", p(&set), "--no-timing"]);
    assert_eq!(o.code, 0, "{}", o.err);
    let with_refs = jssp(&["evaluate", "--policy", "mor", "--instances", p(&set), "--refs", p(&refs), "--no-timing"]);
    assert_eq!(o.out, with_refs.out);

    fs::write(&refs, "{}").unwrap();
    let o = jssp(&["evaluate", "--policy", "mor", "--instances", p(&set), "--refs", p(&refs)]);
    assert_eq!(o.code, 1);
    assert!(o.err.contains("no reference"), "{}", o.err);
}

#[test]
fn generate_kinds_and_formats() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["taillard", "uniform", "abz5", "abz6", "abz7", "yn"] {
        let out = dir.path().join(kind);
        let o = jssp(&["generate", "--kind", kind, "--machines", "4", "--jobs", "5", "--out", p(&out), "--format", "json"]);
        assert_eq!(o.code, 0, "{kind}: {}", o.err);
        let v: Value = serde_json::from_str(&fs::read_to_string(out.join(format!("{kind}0.json"))).unwrap()).unwrap();
        assert_eq!((v["m"].as_u64(), v["n"].as_u64()), (Some(4), Some(5)), "{kind}");
    }
    let o = jssp(&["generate", "--kind", "taillard", "--jobs", "3-5", "--out", p(dir.path())]);
    assert_eq!(o.code, 2);
}

#[test]
fn train_solve_evaluate_with_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let (ckpt, log) = tiny_checkpoint(dir.path(), "3");
    let records: Vec<Value> =
        fs::read_to_string(&log).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 2);
    for key in ["update", "mean_return", "mean_makespan", "val_error", "wall_ms"] {
        assert!(records[1].get(key).is_some(), "{key}");
    }

    let f = dir.path().join("f.txt");
    fs::write(&f, TWO_BY_TWO).unwrap();
    for extra in [&[][..], &["--greedy"][..]] {
        let mut args = vec!["solve", "--checkpoint", p(&ckpt), "--instance", p(&f)];
        args.extend_from_slice(extra);
        let o = jssp(&args);
        assert_eq!(o.code, 0, "{}", o.err);
        assert!(o.out.lines().last().unwrap().starts_with("makespan="));
    }

    let before = file_digest(&ckpt).unwrap();
    let policy = format!("gnn:{}", p(&ckpt));
    let o = jssp(&["evaluate", "--policy", &policy, "--policy", "spt", "--instances", p(&f), "--rollouts", "3"]);
    assert_eq!(o.code, 0, "{}", o.err);
    let v: Value = serde_json::from_str(&o.out).unwrap();
    assert_eq!(v["rollouts"], 3);
    assert_eq!(v["rows"][0]["policy"], policy);
    assert_eq!(file_digest(&ckpt).unwrap(), before);

    let corrupt = dir.path().join("corrupt.ckpt");
    let mut bytes = fs::read(&ckpt).unwrap();
    bytes[8] = 9;
    fs::write(&corrupt, bytes).unwrap();
    let o = jssp(&["solve", "--checkpoint", p(&corrupt), "--instance", p(&f)]);
    assert_eq!(o.code, 1);
    assert!(o.err.contains("version"), "{}", o.err);

    let bench_csv = dir.path().join("bench.csv");
    let o = jssp(&["bench", "--checkpoint", p(&ckpt), "--sizes", "3x2,4x2", "--reps", "2", "--out", p(&bench_csv)]);
    assert_eq!(o.code, 0, "{}", o.err);
    let text = fs::read_to_string(&bench_csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "policy,machines,jobs,repetitions,mean_ms,std_ms,mean_makespan");
    assert_eq!(text.lines().count(), 1 + 2 * 4);
}

#[test]
fn training_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    fs::create_dir_all(&a).unwrap();
    fs::create_dir_all(&b).unwrap();
    let (ca, la) = tiny_checkpoint(&a, "8");
    let (cb, lb) = tiny_checkpoint(&b, "8");
    assert_eq!(fs::read(&la).unwrap(), fs::read(&lb).unwrap());
    assert_eq!(fs::read(&ca).unwrap(), fs::read(&cb).unwrap());
    let (cc, _) = tiny_checkpoint(&a, "9");
    assert_ne!(fs::read(&ca).unwrap(), fs::read(&cc).unwrap());
}

#[test]
fn zero_updates_write_the_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("init.ckpt");
    let o = jssp(&["train", "--out", p(&ckpt), "--hidden", "8", "--max-updates", "0", "--seed", "4"]);
    assert_eq!(o.code, 0, "{}", o.err);
    assert!(o.out.is_empty(), "no updates, no log lines");
    let loaded = jssp_harness::checkpoint::load_checkpoint(&ckpt).unwrap();
    let cfg = jssp_core::ppo::PpoConfig {
        model: jssp_core::agent::ModelConfig { hidden: 8, ..Default::default() },
        max_updates: 0,
        ..Default::default()
    };
    assert_eq!(loaded.params, jssp_core::ppo::Trainer::new(cfg, 4).unwrap().params);
    assert_eq!(loaded.meta.training, Some(cfg));
}
