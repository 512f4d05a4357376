use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use text2table_core::dataset::load_dataset;
use text2table_core::pipeline::{run_strategy, AblationFlags, PredictionRecord, RunConfig, Strategy, TemplateSet, TokenUsage};
use text2table_core::DatasetKind;
use text2table_gateway::{DiskCache, GatewayStats};

use crate::common::{build_gateway, config_error, sha256_file, thread_pool, write_json, write_jsonl};

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Corpus JSONL: {"id", "text", "tables"} per line.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "generic")]
    pub kind: DatasetKind,
    /// cot0 | cot1 | t3 | t3d | mm-u | mm-3s
    #[arg(long)]
    pub strategy: Strategy,
    /// Comma-separated: atomization, iter-schema, iter-table.
    #[arg(long, default_value = "")]
    pub ablate: AblationFlags,
    /// `replay:<dir>`, `scripted:<file>` or a backend TOML file.
    #[arg(long)]
    pub backend: String,
    #[arg(long)]
    pub parallel: Option<usize>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Prompt template overrides (`<key>.txt` files).
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to `<out>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub path: String,
    pub sha256: String,
    pub records: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendInfo {
    pub descriptor: String,
    pub sampling: serde_json::Value,
    pub parallel: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    /// Taken from the previous predictions file; every call is cached.
    Reused,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleStatus {
    pub id: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub calls: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub strategy: Strategy,
    pub flags: AblationFlags,
    pub kind: DatasetKind,
    pub backend: BackendInfo,
    pub template_hash: String,
    pub dataset: DatasetInfo,
    pub limit: Option<usize>,
    pub predictions: String,
    pub started: String,
    pub finished: String,
    pub samples: Vec<SampleStatus>,
    /// Summed over all written predictions, cached calls included.
    pub token_usage: TokenUsage,
    /// Activity of this invocation only.
    pub gateway: GatewayStats,
}

impl RunManifest {
    pub fn failed(&self) -> usize {
        self.samples.iter().filter(|s| matches!(s.status, Status::Failed)).count()
    }
}

fn run_id(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())[..16].to_string()
}

/// Previous predictions that can be reused: same run id, and every transcript
/// digest present in the cache.
fn reusable(out: &Path, manifest: &Path, id: &str, cache: Option<&DiskCache>) -> HashMap<String, PredictionRecord> {
    let Some(cache) = cache else { return HashMap::new() };
    let same_run = fs::read_to_string(manifest)
        .ok()
        .and_then(|s| serde_json::from_str::<RunManifest>(&s).ok())
        .is_some_and(|m| m.run_id == id);
    if !same_run {
        return HashMap::new();
    }
    let Ok(text) = fs::read_to_string(out) else { return HashMap::new() };
    text.lines()
        .filter_map(|l| serde_json::from_str::<PredictionRecord>(l).ok())
        .filter(|r| !r.transcript.is_empty() && r.transcript.iter().all(|t| cache.path_for(&t.digest).exists()))
        .map(|r| (r.id.clone(), r))
        .collect()
}

pub fn run(args: &GenerateArgs) -> Result<i32> {
    let started = chrono::Utc::now().to_rfc3339();
    let samples = load_dataset(&args.dataset, args.kind, args.limit)
        .with_context(|| format!("loading {}", args.dataset.display()))?;
    let templates = match &args.templates {
        Some(dir) => TemplateSet::load_dir(dir).map_err(|e| config_error(e.to_string()))?,
        None => TemplateSet::builtin(),
    };
    let setup = build_gateway(&args.backend, args.cache_dir.as_deref(), args.parallel)?;
    let manifest_path = args.manifest.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".manifest.json");
        p.into()
    });

    let dataset = DatasetInfo {
        path: args.dataset.display().to_string(),
        sha256: sha256_file(&args.dataset)?,
        records: samples.len(),
    };
    let sampling = serde_json::to_value(&setup.sampling)?;
    let template_hash = templates.hash();
    let id = run_id(&[
        args.strategy.as_str(),
        &serde_json::to_string(&args.ablate)?,
        &args.kind.to_string(),
        &setup.descriptor,
        &sampling.to_string(),
        &template_hash,
        &dataset.sha256,
        &format!("{:?}", args.limit),
    ]);

    let cache = args.cache_dir.as_ref().map(DiskCache::existing);
    let previous = reusable(&args.out, &manifest_path, &id, cache.as_ref());
    let cfg = RunConfig::new(args.strategy).with_flags(args.ablate).with_task(args.kind);
    let before = setup.gateway.stats();
    let pool = thread_pool(setup.parallel)?;
    let outcomes: Vec<(SampleStatus, Option<PredictionRecord>)> = pool.install(|| {
        samples
            .par_iter()
            .map(|s| {
                if let Some(r) = previous.get(&s.id) {
                    let st = SampleStatus { id: s.id.clone(), status: Status::Reused, stage: None, error: None, calls: r.transcript.len() };
                    return (st, Some(r.clone()));
                }
                match run_strategy(s, &cfg, &setup.gateway, &templates) {
                    Ok(r) => {
                        let st = SampleStatus { id: s.id.clone(), status: Status::Ok, stage: None, error: None, calls: r.transcript.len() };
                        (st, Some(r.to_record()))
                    }
                    Err(e) => {
                        let st = SampleStatus {
                            id: s.id.clone(),
                            status: Status::Failed,
                            stage: Some(e.stage.clone()),
                            error: Some(e.error.to_string()),
                            calls: e.transcript.len(),
                        };
                        (st, None)
                    }
                }
            })
            .collect()
    });
    let after = setup.gateway.stats();

    let records: Vec<PredictionRecord> = outcomes.iter().filter_map(|(_, r)| r.clone()).collect();
    let mut usage = TokenUsage::default();
    for r in &records {
        usage.prompt += r.token_usage.prompt;
        usage.completion += r.token_usage.completion;
    }
    write_jsonl(&args.out, &records)?;

    let manifest = RunManifest {
        run_id: id,
        strategy: args.strategy,
        flags: args.ablate,
        kind: args.kind,
        backend: BackendInfo { descriptor: setup.descriptor, sampling, parallel: setup.parallel },
        template_hash,
        dataset,
        limit: args.limit,
        predictions: args.out.display().to_string(),
        started,
        finished: chrono::Utc::now().to_rfc3339(),
        samples: outcomes.into_iter().map(|(s, _)| s).collect(),
        token_usage: usage,
        gateway: GatewayStats {
            backend_calls: after.backend_calls - before.backend_calls,
            cache_hits: after.cache_hits - before.cache_hits,
            prompt_tokens: after.prompt_tokens - before.prompt_tokens,
            completion_tokens: after.completion_tokens - before.completion_tokens,
        },
    };
    write_json(&manifest_path, &manifest)?;

    let failed = manifest.failed();
    for s in manifest.samples.iter().filter(|s| matches!(s.status, Status::Failed)) {
        eprintln!("{}: failed at {}: {}", s.id, s.stage.as_deref().unwrap_or("?"), s.error.as_deref().unwrap_or(""));
    }
    eprintln!(
        "{} of {} samples written to {} ({} backend calls, {} cache hits)",
        records.len(),
        manifest.samples.len(),
        args.out.display(),
        manifest.gateway.backend_calls,
        manifest.gateway.cache_hits
    );
    Ok(if failed == 0 { 0 } else { 1 })
}
