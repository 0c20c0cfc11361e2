//! Run manifests: a `key=value` record of what a command read, wrote and
//! was configured with. Written when a command starts and rewritten when it
//! ends, each time via a rename so readers never see a partial file.

use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.txt";

pub fn version() -> String {
    let rev = env!("DGREC_GIT_REV");
    if rev.is_empty() {
        format!("v{}", env!("CARGO_PKG_VERSION"))
    } else {
        format!("v{}-g{rev}", env!("CARGO_PKG_VERSION"))
    }
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut f = fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Debug)]
pub struct RunManifest {
    dir: PathBuf,
    command: String,
    seed: Option<u64>,
    config: String,
    started: u64,
    inputs: Vec<(String, String)>,
    outputs: Vec<(String, String)>,
}

impl RunManifest {
    /// Records the inputs' checksums and writes the initial manifest into
    /// `dir`.
    pub fn start(dir: &Path, command: &str, seed: Option<u64>, config: &str, inputs: &[PathBuf]) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        let inputs = inputs
            .iter()
            .map(|p| Ok((p.display().to_string(), sha256_file(p)?)))
            .collect::<io::Result<_>>()?;
        let m = Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            seed,
            config: config.to_string(),
            started: now(),
            inputs,
            outputs: Vec::new(),
        };
        m.write(None)?;
        Ok(m)
    }

    /// Checksums `files` (relative to the manifest directory) and rewrites
    /// the manifest as finished.
    pub fn finish(mut self, files: &[&str]) -> io::Result<()> {
        for f in files {
            let sum = sha256_file(&self.dir.join(f))?;
            self.outputs.push((f.to_string(), sum));
        }
        self.write(Some(now()))
    }

    fn render(&self, finished: Option<u64>) -> String {
        let mut s = format!(
            "command={}\nversion={}\nseed={}\nstarted={}\nfinished={}\nstatus={}\n",
            self.command,
            version(),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            self.started,
            finished.map(|t| t.to_string()).unwrap_or_default(),
            if finished.is_some() { "complete" } else { "running" },
        );
        for line in self.config.lines().filter(|l| !l.trim().is_empty()) {
            s.push_str(&format!("config.{line}\n"));
        }
        for (p, sum) in &self.inputs {
            s.push_str(&format!("input.{p}={sum}\n"));
        }
        for (p, sum) in &self.outputs {
            s.push_str(&format!("output.{p}={sum}\n"));
        }
        s
    }

    fn write(&self, finished: Option<u64>) -> io::Result<()> {
        write_atomic(&self.dir.join(MANIFEST_FILE), self.render(finished).as_bytes())
    }
}

/// Writes via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}
