//! Run manifests: enough to re-execute a run and check its inputs.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::Global;

#[derive(Debug, Serialize)]
struct InputDigest {
    path: String,
    bytes: u64,
    sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: String,
    argv: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed_source: Option<&'static str>,
    threads: Option<usize>,
    mem_budget: usize,
    config: Value,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
    results: Value,
}

pub fn sha256_file(path: &Path) -> anyhow::Result<(u64, String)> {
    let mut file = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    let mut total = 0u64;
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        total += n as u64;
    }
    Ok((total, hex::encode(hasher.finalize())))
}

/// `<path>.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

impl Manifest {
    pub fn new(command: &str, global: &Global, config: Value) -> Self {
        Self {
            tool: "miaudit",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            argv: std::env::args().skip(1).collect(),
            seed: None,
            seed_source: None,
            threads: global.threads,
            mem_budget: global.mem_budget,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            results: Value::Null,
        }
    }

    pub fn seed(&mut self, seed: u64, source: &'static str) {
        self.seed = Some(seed);
        self.seed_source = Some(source);
    }

    /// Digests `path` and, if present, its sidecars.
    pub fn input(&mut self, path: &Path, sidecars: &[PathBuf]) -> anyhow::Result<()> {
        for p in std::iter::once(path.to_path_buf()).chain(sidecars.iter().cloned()) {
            if p != path && !p.exists() {
                continue;
            }
            let (bytes, sha256) = sha256_file(&p)?;
            self.inputs.push(InputDigest {
                path: p.display().to_string(),
                bytes,
                sha256,
            });
        }
        Ok(())
    }

    /// Digests every regular file directly inside `dir`, in name order.
    pub fn input_dir(&mut self, dir: &Path) -> anyhow::Result<()> {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .with_context(|| format!("listing {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        for f in files {
            self.input(&f, &[])?;
        }
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn results(&mut self, results: Value) {
        self.results = results;
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}
