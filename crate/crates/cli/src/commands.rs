//! Subcommand implementations.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dgrec::eval::{
    collect_attention, evaluate_model, select_case_users, synth_social_data, variance_report, write_attention_csv,
};
use dgrec::graphstore::load_edges;
use dgrec::ingest::{parse_events, prepare_dataset, write_store, DatasetStats, Interval, SplitConfig};
use dgrec::model::{toy_gradient_check, train as fit, SocialContext, TrainData, TrainOptions};
use dgrec::tensor::{read_checkpoint, write_checkpoint, GradCheckOptions};
use dgrec::{DgRec, ModelConfig, Real, SessionStore, SocialGraph};

use crate::data::{
    build_config, env_seed, DataDir, CONFIG_FILE, EDGES_FILE, STATS_FILE, TEST_FILE, TRAIN_FILE, VALID_FILE,
};
use crate::manifest::RunManifest;
use crate::{EvalArgs, GradcheckArgs, IngestArgs, InspectArgs, Precision, SplitName, SynthArgs, TrainArgs};

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn existing(dir: &Path, names: &[&'static str]) -> Vec<&'static str> {
    names.iter().copied().filter(|n| dir.join(n).exists()).collect()
}

pub fn ingest(a: IngestArgs) -> Result<()> {
    let seed = a.seed.or(env_seed()?).unwrap_or(0);
    let interval: Interval = a.interval.parse()?;
    let split = SplitConfig {
        holdout_days: a.holdout_days,
        interval,
        seed,
        max_session_len: a.max_session_len,
    };
    let mut inputs = vec![a.events.clone()];
    inputs.extend(a.edges.clone());
    for p in &inputs {
        if !p.is_file() {
            bail!("input file {} does not exist", p.display());
        }
    }
    let settings = format!(
        "interval={interval}\nholdout_days={}\nmax_session_len={}\n",
        a.holdout_days, a.max_session_len
    );
    let manifest = RunManifest::start(&a.out, "ingest", Some(seed), &settings, &inputs)?;

    let parsed = parse_events(open(&a.events)?)?;
    for e in &parsed.row_errors {
        eprintln!("warning: {}:{}: {}", a.events.display(), e.line, e.message);
    }
    let (data, report) = prepare_dataset(&parsed.events, &split)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if report.filtered_items > 0 {
        eprintln!(
            "note: removed {} held-out item occurrences unseen in training; dropped {} sessions",
            report.filtered_items, report.dropped_sessions
        );
    }
    for (name, store) in [(TRAIN_FILE, &data.train), (VALID_FILE, &data.valid), (TEST_FILE, &data.test)] {
        let mut w = create(&a.out.join(name))?;
        write_store(&mut w, &data.items, &data.users, store)?;
        w.flush()?;
    }
    let mut outputs = vec![TRAIN_FILE, VALID_FILE, TEST_FILE, STATS_FILE];
    let links = match &a.edges {
        Some(path) => {
            let loaded = load_edges(open(path)?, &data.users)?;
            if loaded.dropped > 0 {
                eprintln!("note: dropped {} edges naming users without training sessions", loaded.dropped);
            }
            loaded.graph.write_edges(create(&a.out.join(EDGES_FILE))?, &data.users)?;
            outputs.push(EDGES_FILE);
            loaded.graph.num_edges()
        }
        None => {
            let stale = a.out.join(EDGES_FILE);
            if stale.exists() {
                fs::remove_file(stale)?;
            }
            0
        }
    };
    let stats = DatasetStats::compute(&data.all_sessions(), data.users.len(), data.items.len(), links);
    fs::write(a.out.join(STATS_FILE), stats.to_csv())?;
    println!("{stats}");
    println!(
        "train={} valid={} test={} sessions",
        data.train.num_sessions(),
        data.valid.num_sessions(),
        data.test.num_sessions()
    );
    manifest.finish(&outputs)?;
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<()> {
    let cfg = build_config(&a.config, None)?;
    let data = DataDir::load(&a.data)?;
    let graph = data.graph_for(&cfg)?;
    let manifest = RunManifest::start(&a.out, "train", Some(cfg.seed), &cfg.to_text(), &data.files)?;
    fs::write(a.out.join(CONFIG_FILE), cfg.to_text())?;
    match a.precision {
        Precision::F32 => run_train::<f32>(&a, cfg, &data, &graph)?,
        Precision::F64 => run_train::<f64>(&a, cfg, &data, &graph)?,
    }
    let outputs = existing(&a.out, &[CONFIG_FILE, "metrics.csv", "model.ckpt", "last.ckpt", "best.ckpt"]);
    manifest.finish(&outputs)?;
    Ok(())
}

fn run_train<T: Real>(a: &TrainArgs, cfg: ModelConfig, data: &DataDir, graph: &SocialGraph) -> Result<()> {
    let mut model = DgRec::<T>::new(cfg.clone(), data.users.len(), data.items.len())?;
    let eval_history = data.eval_history(&cfg);
    let td = TrainData {
        train: &data.train,
        valid: (!data.valid.is_empty()).then_some(&data.valid),
        graph,
        train_history: &data.train,
        eval_history: &eval_history,
    };
    let opts = TrainOptions {
        max_steps: a.max_steps,
        checkpoint_dir: Some(a.out.clone()),
        keep_last: a.keep_last,
    };
    let report = fit(&mut model, &td, &opts)?;
    report.write_log(create(&a.out.join("metrics.csv"))?)?;
    let mut w = create(&a.out.join("model.ckpt"))?;
    write_checkpoint(&mut w, &model.params, None)?;
    w.flush()?;
    for row in &report.log {
        println!("{row}");
    }
    let best = match (report.best_epoch, report.best_recall) {
        (Some(e), Some(r)) => format!(" best_epoch={e} best_recall@20={r}"),
        _ => String::new(),
    };
    println!("epochs={} steps={}{best}", report.epochs, report.steps);
    Ok(())
}

/// A trained model with the data it is evaluated on.
struct Loaded {
    cfg: ModelConfig,
    data: DataDir,
    graph: SocialGraph,
    seed: u64,
    inputs: Vec<PathBuf>,
}

fn load_for_scoring(data: &Path, checkpoint: &Path, config: Option<&Path>, seed: Option<u64>) -> Result<Loaded> {
    let cfg_path = match config {
        Some(p) => p.to_path_buf(),
        None => checkpoint.parent().unwrap_or(Path::new(".")).join(CONFIG_FILE),
    };
    let text = fs::read_to_string(&cfg_path)
        .with_context(|| format!("reading model config {} (pass --config)", cfg_path.display()))?;
    let cfg = ModelConfig::from_text(&text).with_context(|| format!("in {}", cfg_path.display()))?;
    let data = DataDir::load(data)?;
    let graph = data.graph_for(&cfg)?;
    let mut inputs = data.files.clone();
    inputs.push(checkpoint.to_path_buf());
    inputs.push(cfg_path);
    Ok(Loaded {
        seed: seed.unwrap_or(cfg.seed),
        cfg,
        data,
        graph,
        inputs,
    })
}

fn load_model<T: Real>(l: &Loaded, checkpoint: &Path) -> Result<DgRec<T>> {
    let ckpt = read_checkpoint(open(checkpoint)?).with_context(|| format!("reading {}", checkpoint.display()))?;
    DgRec::from_params(l.cfg.clone(), l.data.users.len(), l.data.items.len(), ckpt.params_as())
        .with_context(|| format!("{} does not fit this data directory and config", checkpoint.display()))
}

fn split_of(data: &DataDir, split: SplitName) -> &SessionStore {
    match split {
        SplitName::Valid => &data.valid,
        SplitName::Test => &data.test,
    }
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let l = load_for_scoring(&a.data, &a.checkpoint, a.config.as_deref(), a.seed)?;
    let manifest = match &a.out {
        Some(out) => Some(RunManifest::start(out, "eval", Some(l.seed), &l.cfg.to_text(), &l.inputs)?),
        None => None,
    };
    let summary = match a.precision {
        Precision::F32 => run_eval(&l, &load_model::<f32>(&l, &a.checkpoint)?, a.split)?,
        Precision::F64 => run_eval(&l, &load_model::<f64>(&l, &a.checkpoint)?, a.split)?,
    };
    let (positions, loss, recall, ndcg) = summary;
    let name = match a.split {
        SplitName::Valid => "valid",
        SplitName::Test => "test",
    };
    let last = format!("recall@20={recall} ndcg={ndcg}");
    if let (Some(out), Some(m)) = (&a.out, manifest) {
        fs::write(
            out.join("eval.txt"),
            format!("split={name}\npositions={positions}\nloss={loss}\n{last}\n"),
        )?;
        m.finish(&["eval.txt"])?;
    }
    println!("split={name} positions={positions} loss={loss}");
    println!("{last}");
    Ok(())
}

fn run_eval<T: Real>(l: &Loaded, model: &DgRec<T>, split: SplitName) -> Result<(usize, f64, f64, f64)> {
    let history = l.data.eval_history(&l.cfg);
    let ctx = SocialContext {
        graph: &l.graph,
        history: &history,
    };
    let s = evaluate_model(model, split_of(&l.data, split), ctx, l.seed)?;
    Ok((s.positions, s.loss, s.recall, s.ndcg))
}

pub fn inspect(a: InspectArgs) -> Result<()> {
    let l = load_for_scoring(&a.data, &a.checkpoint, a.config.as_deref(), a.seed)?;
    if !l.cfg.mode.uses_graph() {
        bail!("mode {} does not use attention; nothing to inspect", l.cfg.mode);
    }
    let manifest = RunManifest::start(&a.out, "inspect", Some(l.seed), &l.cfg.to_text(), &l.inputs)?;
    let model = load_model::<f32>(&l, &a.checkpoint)?;
    let store = split_of(&l.data, a.split);
    let users = select_case_users(store, &l.graph, a.min_sessions, a.min_friends);
    if users.is_empty() {
        eprintln!(
            "warning: no user has {} sessions in this split and {} friends",
            a.min_sessions, a.min_friends
        );
    }
    let history = l.data.eval_history(&l.cfg);
    let ctx = SocialContext {
        graph: &l.graph,
        history: &history,
    };
    let sessions = collect_attention(&model, store, ctx, l.seed, Some(&users))?;
    write_attention_csv(create(&a.out.join("attention.csv"))?, &sessions, &l.data.users)?;
    let report = variance_report(&sessions);
    report.write_histogram(create(&a.out.join("variance.csv"))?)?;
    let mut w = create(&a.out.join("case_users.txt"))?;
    for u in &users {
        writeln!(w, "{}", l.data.users.id(u.0))?;
    }
    w.flush()?;
    manifest.finish(&["attention.csv", "variance.csv", "case_users.txt"])?;
    let fmt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_else(|| "n/a".into());
    println!("case_users={} sessions={}", users.len(), sessions.len());
    println!(
        "mean_intra_variance={} mean_inter_variance={}",
        fmt(report.mean_intra()),
        fmt(report.mean_inter())
    );
    Ok(())
}

pub fn gradcheck(a: GradcheckArgs) -> Result<()> {
    let seed = a.seed.or(env_seed()?).unwrap_or(0);
    let opts = GradCheckOptions {
        eps: a.eps,
        tolerance: a.tolerance,
        seed,
        ..GradCheckOptions::default()
    };
    let report = toy_gradient_check(&opts)?;
    let mut text = String::from("param,max_rel_error,checked,skipped_kinks\n");
    for p in &report.params {
        text.push_str(&format!("{},{:e},{},{}\n", p.name, p.max_rel_error, p.checked, p.skipped_kinks));
    }
    print!("{text}");
    println!("max_rel_error={:e}", report.max_rel_error());
    if let Some(out) = &a.out {
        let settings = format!("scale=toy\neps={}\ntolerance={}\n", a.eps, a.tolerance);
        let m = RunManifest::start(out, "gradcheck", Some(seed), &settings, &[])?;
        fs::write(out.join("gradcheck.csv"), &text)?;
        m.finish(&["gradcheck.csv"])?;
    }
    if !report.passed() {
        let names: Vec<&str> = report.failures().map(|p| p.name.as_str()).collect();
        bail!("relative error above {} for {}", a.tolerance, names.join(", "));
    }
    Ok(())
}

pub fn synth(a: SynthArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.influence) {
        bail!("--influence must lie in [0, 1]");
    }
    let seed = a.seed.or(env_seed()?).unwrap_or(0);
    let settings = format!(
        "users={}\nitems={}\nsessions={}\ninfluence={}\n",
        a.users, a.items, a.sessions, a.influence
    );
    let manifest = RunManifest::start(&a.out, "synth", Some(seed), &settings, &[])?;
    let d = synth_social_data(a.users, a.items, a.sessions, a.influence, seed);
    d.write_events(create(&a.out.join("events.csv"))?)?;
    d.write_edges(create(&a.out.join("edges.csv"))?)?;
    manifest.finish(&["events.csv", "edges.csv"])?;
    println!("events={} edges={}", d.events.len(), d.edges.len());
    Ok(())
}
