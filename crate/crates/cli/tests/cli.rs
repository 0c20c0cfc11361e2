use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dgrec() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dgrec"));
    c.env_remove("DGREC_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    dgrec().args(args).output().expect("spawn dgrec")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Synthetic data ingested into `<root>/data`.
fn prepared(root: &Path) -> PathBuf {
    let raw = root.join("raw");
    ok(&["synth", "--users", "30", "--items", "40", "--sessions", "4", "--influence", "0.5", "--seed", "2", "--out", p(&raw)]);
    let data = root.join("data");
    ok(&[
        "ingest",
        "--events",
        p(&raw.join("events.csv")),
        "--edges",
        p(&raw.join("edges.csv")),
        "--holdout-days",
        "7",
        "--out",
        p(&data),
    ]);
    data
}

const TINY: &[&str] = &["--hidden", "6", "--embed", "6", "--layers", "1", "--fanouts", "3", "--max-epochs", "2", "--batch", "16"];

fn train(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--data", p(data), "--out", p(out)];
    args.extend_from_slice(TINY);
    args.extend_from_slice(extra);
    run(&args)
}

fn manifest_outputs(dir: &Path) -> Vec<String> {
    fs::read_to_string(dir.join("manifest.txt"))
        .unwrap()
        .lines()
        .filter(|l| l.starts_with("output."))
        .map(String::from)
        .collect()
}

#[test]
fn missing_events_is_a_usage_error() {
    let out = run(&["ingest", "--out", "/tmp/unused"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_events_file_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["ingest", "--events", p(&dir.path().join("nope.csv")), "--out", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));
}

#[test]
fn ingest_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let data = prepared(dir.path());
    let first = manifest_outputs(&data);
    let raw = dir.path().join("raw");
    let again = dir.path().join("again");
    ok(&[
        "ingest",
        "--events",
        p(&raw.join("events.csv")),
        "--edges",
        p(&raw.join("edges.csv")),
        "--holdout-days",
        "7",
        "--out",
        p(&again),
    ]);
    assert_eq!(first, manifest_outputs(&again));
    assert!(fs::read_to_string(data.join("stats.csv")).unwrap().starts_with("users,"));
}

#[test]
fn train_eval_inspect_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = prepared(dir.path());
    let model = dir.path().join("model");
    let out = train(&data, &model, &["--seed", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["metrics.csv", "model.ckpt", "last.ckpt", "config.txt", "manifest.txt"] {
        assert!(model.join(f).exists(), "{f}");
    }
    let metrics = fs::read_to_string(model.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("epoch,step,split,loss,recall@20,ndcg"));

    let stdout = ok(&["eval", "--data", p(&data), "--checkpoint", p(&model.join("model.ckpt")), "--split", "test"]);
    let last = stdout.lines().last().unwrap();
    let (r, n) = last.split_once(' ').unwrap();
    let recall: f64 = r.strip_prefix("recall@20=").unwrap().parse().unwrap();
    let ndcg: f64 = n.strip_prefix("ndcg=").unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&recall) && ndcg > 0.0 && ndcg <= 1.0);

    let insp = dir.path().join("inspect");
    let stdout = ok(&[
        "inspect",
        "--data",
        p(&data),
        "--checkpoint",
        p(&model.join("model.ckpt")),
        "--min-sessions",
        "1",
        "--min-friends",
        "1",
        "--out",
        p(&insp),
    ]);
    assert!(stdout.contains("mean_intra_variance="));
    let att = fs::read_to_string(insp.join("attention.csv")).unwrap();
    assert!(att.starts_with("target_user,session_id,step,layer,friend_id,weight"));
    assert!(att.lines().count() > 1);
    let hist = fs::read_to_string(insp.join("variance.csv")).unwrap();
    assert_eq!(hist.lines().count(), 21);
}

#[test]
fn single_threaded_training_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = prepared(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let mut args = vec!["--threads", "1", "train", "--data", p(&data), "--out", p(out), "--seed", "9"];
        args.extend_from_slice(TINY);
        ok(&args);
    }
    assert_eq!(fs::read(a.join("metrics.csv")).unwrap(), fs::read(b.join("metrics.csv")).unwrap());
    assert_eq!(manifest_outputs(&a), manifest_outputs(&b));
}

#[test]
fn self_only_trains_without_edges() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    ok(&["synth", "--users", "20", "--items", "30", "--sessions", "4", "--seed", "1", "--out", p(&raw)]);
    let data = dir.path().join("data");
    ok(&["ingest", "--events", p(&raw.join("events.csv")), "--out", p(&data)]);
    assert!(!data.join("edges.csv").exists());

    let out = train(&data, &dir.path().join("self"), &["--mode", "self_only"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = train(&data, &dir.path().join("full"), &["--mode", "full"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("self_only"));
}

#[test]
fn config_precedence_flag_over_file_over_default() {
    let dir = tempfile::tempdir().unwrap();
    let data = prepared(dir.path());
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# file values\nhidden=7\nembed=7\nlr=0.05\n").unwrap();
    let out = dir.path().join("m");
    let res = run(&[
        "train",
        "--data",
        p(&data),
        "--out",
        p(&out),
        "--config",
        p(&cfg),
        "--hidden",
        "4",
        "--layers",
        "1",
        "--fanouts",
        "2",
        "--max-epochs",
        "1",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let written = fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(written.contains("hidden=4\n"), "{written}");
    assert!(written.contains("embed=7\n"));
    assert!(written.contains("lr=0.05\n"));
    assert!(written.contains("batch=200\n"));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let data = prepared(dir.path());
    let run_with = |name: &str, extra: &[&str]| -> String {
        let out = dir.path().join(name);
        let mut args = vec!["train", "--data", p(&data), "--out", p(&out), "--max-epochs", "1"];
        args.extend_from_slice(&TINY[..8]);
        args.extend_from_slice(extra);
        let res = dgrec().env("DGREC_SEED", "7").args(&args).output().unwrap();
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        fs::read_to_string(out.join("config.txt")).unwrap()
    };
    assert!(run_with("env", &[]).contains("seed=7\n"));
    assert!(run_with("flag", &["--seed", "3"]).contains("seed=3\n"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = prepared(dir.path());
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "hiden=10\n").unwrap();
    let res = run(&["train", "--data", p(&data), "--out", p(&dir.path().join("m")), "--config", p(&cfg)]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("hiden"));
}

#[test]
fn checkpoint_shape_mismatch_is_descriptive() {
    let dir = tempfile::tempdir().unwrap();
    let data = prepared(dir.path());
    let model = dir.path().join("model");
    assert!(train(&data, &model, &[]).status.success());
    let cfg = dir.path().join("other.cfg");
    let text = fs::read_to_string(model.join("config.txt")).unwrap().replace("hidden=6", "hidden=9");
    fs::write(&cfg, text).unwrap();
    let res = run(&[
        "eval",
        "--data",
        p(&data),
        "--checkpoint",
        p(&model.join("model.ckpt")),
        "--config",
        p(&cfg),
    ]);
    assert_eq!(res.status.code(), Some(1));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("does not fit"), "{err}");
}

#[test]
fn gradcheck_passes_and_fails_on_impossible_tolerance() {
    let stdout = ok(&["gradcheck", "--scale", "toy"]);
    assert!(stdout.lines().last().unwrap().starts_with("max_rel_error="));
    let res = run(&["gradcheck", "--scale", "toy", "--tolerance", "1e-300"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn synth_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(&["synth", "--users", "25", "--items", "30", "--seed", "4", "--out", p(out)]);
    }
    assert_eq!(fs::read(a.join("events.csv")).unwrap(), fs::read(b.join("events.csv")).unwrap());
    assert_eq!(fs::read(a.join("edges.csv")).unwrap(), fs::read(b.join("edges.csv")).unwrap());
}
