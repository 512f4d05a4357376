//! Shared plumbing: atomic file writes, JSONL, gateway construction.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use text2table_core::analysis::Aliases;
use text2table_gateway::{load_backend_spec, DiskCache, Gateway, SamplingParams};

/// Bad flags or configuration; the process exits with status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Writes through a temp file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut s = String::new();
    for it in items {
        s.push_str(&serde_json::to_string(it)?);
        s.push('\n');
    }
    write_atomic(path, s.as_bytes())
}

pub fn csv_bytes<R: Serialize>(rows: &[R]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner()?)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn load_aliases(path: Option<&PathBuf>) -> Result<Aliases> {
    match path {
        Some(p) => Aliases::load(p).with_context(|| format!("alias file {}", p.display())),
        None => Ok(Aliases::builtin()),
    }
}

pub struct GatewaySetup {
    pub gateway: Gateway,
    pub descriptor: String,
    pub sampling: SamplingParams,
    pub parallel: usize,
}

/// Builds the gateway for `--backend`, with an optional write-once cache.
/// `parallel` from the flag wins over the backend file's value.
pub fn build_gateway(spec: &str, cache_dir: Option<&Path>, parallel: Option<usize>) -> Result<GatewaySetup> {
    let (config, sampling, file_parallel) =
        load_backend_spec(spec).map_err(|e| config_error(format!("--backend {spec}: {e}")))?;
    let sampling = sampling.unwrap_or_default();
    let parallel = parallel.or(file_parallel).unwrap_or(Gateway::DEFAULT_PARALLELISM).max(1);
    let backend = config.build().map_err(|e| config_error(format!("--backend {spec}: {e}")))?;
    let mut gateway = Gateway::new(backend, sampling.clone()).with_parallelism(parallel);
    if let Some(dir) = cache_dir {
        gateway = gateway.with_cache(DiskCache::open(dir)?);
    }
    Ok(GatewaySetup { gateway, descriptor: config.describe(), sampling, parallel })
}

pub fn thread_pool(n: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build()?)
}
