use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::backend::{host_of, Backend, HttpChatBackend, ReplayBackend, RetryPolicy, ScriptedBackend};
use crate::error::GatewayError;

/// Environment variable consulted for the http-chat API key.
pub const API_KEY_ENV: &str = "TEXT2TABLE_API_KEY";

fn default_timeout() -> u64 {
    120
}

fn default_attempts() -> u32 {
    5
}

/// Which backend answers requests. Parsed from a TOML file or a short
/// `replay:<dir>` / `scripted:<file>` spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackendConfig {
    HttpChat {
        base_url: String,
        #[serde(default, skip_serializing)]
        api_key: Option<String>,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default)]
        embedding_model: Option<String>,
        #[serde(default)]
        send_top_k: bool,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
        #[serde(default = "default_attempts")]
        max_attempts: u32,
    },
    Replay {
        dir: PathBuf,
    },
    Scripted {
        #[serde(default)]
        responses: Vec<String>,
        #[serde(default)]
        fallback: Option<String>,
    },
}

impl BackendConfig {
    pub fn build(&self) -> Result<Arc<dyn Backend>, GatewayError> {
        Ok(match self {
            BackendConfig::HttpChat {
                base_url,
                api_key,
                api_key_env,
                embedding_model,
                send_top_k,
                timeout_secs,
                max_attempts,
            } => {
                let env = api_key_env.as_deref().unwrap_or(API_KEY_ENV);
                let retry = RetryPolicy { max_attempts: *max_attempts, ..RetryPolicy::default() };
                Arc::new(
                    HttpChatBackend::new(
                        base_url.clone(),
                        api_key.clone(),
                        env,
                        Duration::from_secs(*timeout_secs),
                    )?
                    .with_retry(retry)
                    .with_embedding_model(embedding_model.clone())
                    .with_top_k(*send_top_k),
                )
            }
            BackendConfig::Replay { dir } => Arc::new(ReplayBackend::new(dir.clone())),
            BackendConfig::Scripted { responses, fallback } => {
                let b = ScriptedBackend::new(responses.clone());
                Arc::new(match fallback {
                    Some(f) => b.with_fallback(f.clone()),
                    None => b,
                })
            }
        })
    }

    /// Secret-free description for manifests and reports.
    pub fn describe(&self) -> String {
        match self {
            BackendConfig::HttpChat { base_url, .. } => format!("http-chat:{}", host_of(base_url)),
            BackendConfig::Replay { .. } => "replay".into(),
            BackendConfig::Scripted { .. } => "scripted".into(),
        }
    }
}

/// Sampling parameters applied to every chat request.
///
/// Defaults are greedy decoding: temperature 0, top_p 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    #[serde(default = "SamplingParams::default_model")]
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "SamplingParams::default_top_p")]
    pub top_p: f64,
    #[serde(default)]
    pub top_k: Option<u32>,
    #[serde(default)]
    pub max_tokens: Option<u32>,
}

impl SamplingParams {
    fn default_model() -> String {
        "gpt-4o-2024-08-06".into()
    }

    fn default_top_p() -> f64 {
        1.0
    }
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            model: Self::default_model(),
            temperature: 0.0,
            top_p: 1.0,
            top_k: None,
            max_tokens: None,
        }
    }
}

#[derive(Debug, Deserialize)]
struct ConfigFile {
    #[serde(flatten)]
    backend: BackendConfig,
    #[serde(flatten)]
    sampling: SamplingParams,
    #[serde(default)]
    parallel: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ScriptFile {
    List(Vec<String>),
    Full {
        #[serde(default)]
        responses: Vec<String>,
        #[serde(default)]
        fallback: Option<String>,
    },
}

/// Resolves a `--backend` argument.
///
/// Accepted forms: `replay:<dir>`, `scripted:<file.json>` (a JSON list of
/// responses or `{"responses": [...], "fallback": "..."}`), or a path to a
/// TOML file with a `kind` field plus optional sampling fields and `parallel`.
pub fn load_backend_spec(
    spec: &str,
) -> Result<(BackendConfig, Option<SamplingParams>, Option<usize>), GatewayError> {
    if let Some(dir) = spec.strip_prefix("replay:") {
        return Ok((BackendConfig::Replay { dir: dir.into() }, None, None));
    }
    if let Some(file) = spec.strip_prefix("scripted:") {
        let text = fs::read_to_string(file)?;
        let (responses, fallback) = match serde_json::from_str::<ScriptFile>(&text)? {
            ScriptFile::List(r) => (r, None),
            ScriptFile::Full { responses, fallback } => (responses, fallback),
        };
        return Ok((BackendConfig::Scripted { responses, fallback }, None, None));
    }
    let path = Path::new(spec);
    let text = fs::read_to_string(path)
        .map_err(|e| GatewayError::Config(format!("cannot read backend config {spec}: {e}")))?;
    let file: ConfigFile =
        toml::from_str(&text).map_err(|e| GatewayError::Config(format!("{spec}: {e}")))?;
    let backend = match file.backend {
        // Relative replay dirs are resolved against the config file.
        BackendConfig::Replay { dir } if dir.is_relative() => BackendConfig::Replay {
            dir: path.parent().unwrap_or(Path::new(".")).join(dir),
        },
        other => other,
    };
    Ok((backend, Some(file.sampling), file.parallel))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_short_specs() {
        let (b, s, p) = load_backend_spec("replay:/tmp/fixtures").unwrap();
        assert_eq!(b, BackendConfig::Replay { dir: "/tmp/fixtures".into() });
        assert!(s.is_none() && p.is_none());
    }

    #[test]
    fn parses_toml_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.toml");
        fs::write(
            &path,
            "kind = \"http-chat\"\nbase_url = \"https://api.example.com/v1\"\nmodel = \"gemini-2.0-flash-exp\"\ntop_k = 40\nparallel = 8\n",
        )
        .unwrap();
        let (b, s, p) = load_backend_spec(path.to_str().unwrap()).unwrap();
        assert_eq!(b.describe(), "http-chat:api.example.com");
        let s = s.unwrap();
        assert_eq!(s.model, "gemini-2.0-flash-exp");
        assert_eq!(s.temperature, 0.0);
        assert_eq!(s.top_p, 1.0);
        assert_eq!(s.top_k, Some(40));
        assert_eq!(p, Some(8));
    }

    #[test]
    fn scripted_file_forms() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        fs::write(&a, r#"["one", "two"]"#).unwrap();
        let (b, _, _) = load_backend_spec(&format!("scripted:{}", a.display())).unwrap();
        assert_eq!(b, BackendConfig::Scripted { responses: vec!["one".into(), "two".into()], fallback: None });
        let f = dir.path().join("f.json");
        fs::write(&f, r#"{"fallback": "YES"}"#).unwrap();
        let (b, _, _) = load_backend_spec(&format!("scripted:{}", f.display())).unwrap();
        assert_eq!(b, BackendConfig::Scripted { responses: vec![], fallback: Some("YES".into()) });
    }
}
