//! The ingested data directory and configuration assembly.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dgrec::graphstore::load_edges;
use dgrec::ingest::{read_store, Vocab};
use dgrec::{ModelConfig, SessionStore, SocialGraph};

use crate::ConfigArgs;

pub const TRAIN_FILE: &str = "train.dgrs";
pub const VALID_FILE: &str = "valid.dgrs";
pub const TEST_FILE: &str = "test.dgrs";
pub const EDGES_FILE: &str = "edges.csv";
pub const STATS_FILE: &str = "stats.csv";
pub const CONFIG_FILE: &str = "config.txt";

pub struct DataDir {
    pub items: Vocab,
    pub users: Vocab,
    pub train: SessionStore,
    pub valid: SessionStore,
    pub test: SessionStore,
    pub graph: Option<SocialGraph>,
    /// Files read, for the run manifest.
    pub files: Vec<PathBuf>,
}

fn read_split(path: &Path) -> Result<(Vocab, Vocab, SessionStore)> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_store(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

impl DataDir {
    pub fn load(dir: &Path) -> Result<Self> {
        let mut files = Vec::new();
        let (items, users, train) = read_split(&dir.join(TRAIN_FILE))?;
        files.push(dir.join(TRAIN_FILE));
        let mut other = Vec::new();
        for name in [VALID_FILE, TEST_FILE] {
            let path = dir.join(name);
            let (i, u, store) = read_split(&path)?;
            if i != items || u != users {
                bail!("{} was written with different vocabularies than {TRAIN_FILE}", path.display());
            }
            files.push(path);
            other.push(store);
        }
        let test = other.pop().expect("two splits");
        let valid = other.pop().expect("two splits");
        let edges = dir.join(EDGES_FILE);
        let graph = if edges.exists() {
            let f = File::open(&edges).with_context(|| format!("opening {}", edges.display()))?;
            let loaded = load_edges(BufReader::new(f), &users).with_context(|| format!("reading {}", edges.display()))?;
            files.push(edges);
            Some(loaded.graph)
        } else {
            None
        };
        Ok(Self {
            items,
            users,
            train,
            valid,
            test,
            graph,
            files,
        })
    }

    /// The friendship graph, or an edgeless one when the mode ignores it.
    pub fn graph_for(&self, config: &ModelConfig) -> Result<SocialGraph> {
        match &self.graph {
            Some(g) => Ok(g.clone()),
            None if !config.mode.uses_graph() => Ok(SocialGraph::new(self.users.len())),
            None => bail!(
                "mode {} needs {EDGES_FILE} in the data directory; ingest with --edges or use --mode self_only",
                config.mode
            ),
        }
    }

    pub fn all_sessions(&self) -> SessionStore {
        let mut all = self.train.clone();
        all.merge(&self.valid);
        all.merge(&self.test);
        all
    }

    /// Sessions friends' recent activity is looked up in at evaluation.
    pub fn eval_history(&self, config: &ModelConfig) -> SessionStore {
        if config.strict_train_friends {
            self.train.clone()
        } else {
            self.all_sessions()
        }
    }
}

/// `DGREC_SEED`, if set.
pub fn env_seed() -> Result<Option<u64>> {
    match std::env::var("DGREC_SEED") {
        Ok(v) => Ok(Some(v.trim().parse().with_context(|| format!("DGREC_SEED={v:?} is not an integer"))?)),
        Err(_) => Ok(None),
    }
}

/// Defaults, then `DGREC_SEED`, then `base` (a config file), then the
/// file given with `--config`, then individual flags.
pub fn build_config(args: &ConfigArgs, base: Option<&Path>) -> Result<ModelConfig> {
    let mut cfg = ModelConfig::default();
    if let Some(seed) = env_seed()? {
        cfg.seed = seed;
    }
    for path in base.into_iter().chain(args.config.as_deref()) {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_text(&text).with_context(|| format!("in {}", path.display()))?;
    }
    let mut pairs: Vec<(&str, String)> = Vec::new();
    let flags: [(&str, Option<String>); 11] = [
        ("mode", args.mode.clone()),
        ("seed", args.seed.map(|v| v.to_string())),
        ("hidden", args.hidden.map(|v| v.to_string())),
        ("embed", args.embed.map(|v| v.to_string())),
        ("layers", args.layers.map(|v| v.to_string())),
        ("fanouts", args.fanouts.clone()),
        ("dropout", args.dropout.map(|v| v.to_string())),
        ("batch", args.batch.map(|v| v.to_string())),
        ("lr", args.lr.map(|v| v.to_string())),
        ("max_epochs", args.max_epochs.map(|v| v.to_string())),
        ("patience", args.patience.map(|v| v.to_string())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            pairs.push((k, v));
        }
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, found {kv:?}"))?;
        pairs.push((k.trim(), v.to_string()));
    }
    for (k, v) in pairs {
        cfg.set(k, &v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}
