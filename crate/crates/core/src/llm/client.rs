//! Remote completion client with retries, bounded concurrency, and a
//! mandatory on-disk response cache.
//!
//! The backend is any text-in/text-out completion endpoint; the default
//! implementation speaks the common chat-completions JSON shape. Responses
//! are cached keyed by (model, prompt hash) so reruns make zero network
//! calls and are fully deterministic. A tweet whose retry budget is
//! exhausted becomes an explicit Unclassified record, never a silent drop.

use super::parse::{parse_confidence, parse_direct, ConfidenceParse, DirectParse};
use super::prompts::{build_prompt, PromptMode, PromptSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("api key environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("cache io error at {path}: {source}")]
    CacheIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error, Clone)]
pub enum BackendError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("auth: {0}")]
    Auth(String),
}

/// Anything that turns a prompt into raw completion text.
pub trait CompletionBackend: Sync {
    fn complete(&self, prompt: &str) -> Result<String, BackendError>;
}

/// Remote endpoint configuration; the API key comes from the environment
/// variable named here, never from the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub retry_budget: u32,
    pub concurrency: usize,
    pub backoff_base_ms: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4".into(),
            api_key_env: "LLM_API_KEY".into(),
            timeout_secs: 60,
            retry_budget: 3,
            concurrency: 4,
            backoff_base_ms: 500,
        }
    }
}

/// Chat-completions HTTP backend.
pub struct HttpBackend {
    cfg: EndpointConfig,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(cfg: EndpointConfig) -> Result<Self, LlmError> {
        let api_key = std::env::var(&cfg.api_key_env)
            .map_err(|_| LlmError::MissingApiKey(cfg.api_key_env.clone()))?;
        let agent = ureq::AgentBuilder::new()
            .timeout(std::time::Duration::from_secs(cfg.timeout_secs))
            .build();
        Ok(HttpBackend { cfg, api_key, agent })
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let url = format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'));
        let body = serde_json::json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        let response = self
            .agent
            .post(&url)
            .set("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body);
        match response {
            Ok(resp) => {
                let value: serde_json::Value = resp
                    .into_json()
                    .map_err(|e| BackendError::Transport(e.to_string()))?;
                value["choices"][0]["message"]["content"]
                    .as_str()
                    .map(|s| s.to_string())
                    .ok_or_else(|| {
                        BackendError::Transport("response missing message content".into())
                    })
            }
            Err(ureq::Error::Status(code, resp)) => {
                let detail = resp.into_string().unwrap_or_default();
                if code == 401 || code == 403 {
                    Err(BackendError::Auth(format!("status {code}: {detail}")))
                } else {
                    Err(BackendError::Transport(format!("status {code}: {detail}")))
                }
            }
            Err(e) => Err(BackendError::Transport(e.to_string())),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheLine {
    prompt_hash: String,
    model: String,
    raw_response: String,
    timestamp: u64,
}

/// Append-only JSONL response cache keyed by (model, prompt hash).
pub struct ResponseCache {
    path: PathBuf,
    entries: HashMap<(String, String), String>,
}

impl ResponseCache {
    /// Open (or create) the cache file and load all prior entries.
    pub fn open(path: &Path) -> Result<Self, LlmError> {
        let mut entries = HashMap::new();
        match std::fs::File::open(path) {
            Ok(file) => {
                for line in std::io::BufReader::new(file).lines() {
                    let line = line.map_err(|source| LlmError::CacheIo {
                        path: path.display().to_string(),
                        source,
                    })?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    if let Ok(entry) = serde_json::from_str::<CacheLine>(&line) {
                        entries.insert((entry.model, entry.prompt_hash), entry.raw_response);
                    }
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(source) => {
                return Err(LlmError::CacheIo { path: path.display().to_string(), source })
            }
        }
        Ok(ResponseCache { path: path.to_path_buf(), entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn get(&self, model: &str, prompt_hash: &str) -> Option<&String> {
        self.entries.get(&(model.to_string(), prompt_hash.to_string()))
    }

    fn put(&mut self, model: &str, prompt_hash: &str, raw: &str) -> Result<(), LlmError> {
        let line = CacheLine {
            prompt_hash: prompt_hash.to_string(),
            model: model.to_string(),
            raw_response: raw.to_string(),
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|source| LlmError::CacheIo {
                path: self.path.display().to_string(),
                source,
            })?;
        serde_json::to_writer(&mut file, &line).map_err(|e| LlmError::CacheIo {
            path: self.path.display().to_string(),
            source: std::io::Error::other(e),
        })?;
        file.write_all(b"\n").map_err(|source| LlmError::CacheIo {
            path: self.path.display().to_string(),
            source,
        })?;
        self.entries
            .insert((model.to_string(), prompt_hash.to_string()), raw.to_string());
        Ok(())
    }
}

pub fn prompt_hash(prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prompt.as_bytes());
    format!("{:x}", hasher.finalize())
}

/// Parsed classification for one tweet, or an explicit failure record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ParsedResponse {
    Direct(DirectParse),
    Confidence(ConfidenceParse),
    Unclassified { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub tweet_id: String,
    pub raw: Option<String>,
    pub parsed: ParsedResponse,
}

impl LlmResponse {
    pub fn is_unclassified(&self) -> bool {
        matches!(self.parsed, ParsedResponse::Unclassified { .. })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ClassifyStats {
    pub network_calls: usize,
    pub cache_hits: usize,
    pub unclassified: usize,
}

fn parse_for(spec: &PromptSpec, raw: &str) -> ParsedResponse {
    match spec.mode {
        PromptMode::Direct => match parse_direct(raw) {
            Ok(p) => ParsedResponse::Direct(p),
            Err(e) => ParsedResponse::Unclassified { reason: e.to_string() },
        },
        PromptMode::Confidence => match parse_confidence(raw) {
            Ok(p) => ParsedResponse::Confidence(p),
            Err(e) => ParsedResponse::Unclassified { reason: e.to_string() },
        },
    }
}

/// Classify a batch of (id, text) tweets through the backend.
///
/// Cached prompts never touch the network. Fresh prompts retry transport
/// and parse failures up to the retry budget with exponential backoff;
/// the final raw response (parseable or not) is cached. Authentication
/// failures abort the whole batch. Output order matches input order.
pub fn classify_remote(
    tweets: &[(String, String)],
    spec: &PromptSpec,
    backend: &dyn CompletionBackend,
    cache: &mut ResponseCache,
    endpoint: &EndpointConfig,
) -> Result<(Vec<LlmResponse>, ClassifyStats), LlmError> {
    struct Job {
        index: usize,
        tweet_id: String,
        prompt: String,
        hash: String,
    }

    let mut results: Vec<Option<LlmResponse>> = (0..tweets.len()).map(|_| None).collect();
    let mut jobs: Vec<Job> = Vec::new();
    let mut cache_hits = 0usize;

    for (index, (id, text)) in tweets.iter().enumerate() {
        let prompt = build_prompt(spec, text);
        let hash = prompt_hash(&prompt);
        if let Some(raw) = cache.get(&endpoint.model, &hash) {
            cache_hits += 1;
            results[index] = Some(LlmResponse {
                tweet_id: id.clone(),
                raw: Some(raw.clone()),
                parsed: parse_for(spec, raw),
            });
        } else {
            jobs.push(Job { index, tweet_id: id.clone(), prompt, hash });
        }
    }

    // (job index, tweet id, raw response, parsed outcome)
    type FreshResult = (usize, String, Option<String>, ParsedResponse);
    let network_calls = AtomicUsize::new(0);
    let auth_failure: Mutex<Option<String>> = Mutex::new(None);
    let abort = AtomicBool::new(false);
    let next_job = AtomicUsize::new(0);
    let fresh: Mutex<Vec<FreshResult>> = Mutex::new(Vec::new());

    let workers = endpoint.concurrency.clamp(1, jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if abort.load(Ordering::SeqCst) {
                    return;
                }
                let j = next_job.fetch_add(1, Ordering::SeqCst);
                if j >= jobs.len() {
                    return;
                }
                let job = &jobs[j];
                let mut last_raw: Option<String> = None;
                let mut last_reason = String::new();
                let mut parsed: Option<ParsedResponse> = None;

                for attempt in 0..=endpoint.retry_budget {
                    if abort.load(Ordering::SeqCst) {
                        return;
                    }
                    if attempt > 0 && endpoint.backoff_base_ms > 0 {
                        let backoff = endpoint.backoff_base_ms.saturating_mul(1 << (attempt - 1));
                        std::thread::sleep(std::time::Duration::from_millis(backoff));
                    }
                    network_calls.fetch_add(1, Ordering::SeqCst);
                    match backend.complete(&job.prompt) {
                        Ok(raw) => {
                            let p = parse_for(spec, &raw);
                            let ok = !matches!(p, ParsedResponse::Unclassified { .. });
                            last_raw = Some(raw);
                            if ok {
                                parsed = Some(p);
                                break;
                            }
                            if let ParsedResponse::Unclassified { reason } = p {
                                last_reason = reason;
                            }
                        }
                        Err(BackendError::Auth(detail)) => {
                            *auth_failure.lock().unwrap() = Some(detail);
                            abort.store(true, Ordering::SeqCst);
                            return;
                        }
                        Err(BackendError::Transport(detail)) => {
                            last_reason = format!("transport: {detail}");
                        }
                    }
                }

                let parsed = parsed.unwrap_or(ParsedResponse::Unclassified {
                    reason: format!("retry budget exhausted: {last_reason}"),
                });
                fresh.lock().unwrap().push((j, job.tweet_id.clone(), last_raw, parsed));
            });
        }
    });

    if let Some(detail) = auth_failure.into_inner().unwrap() {
        return Err(LlmError::Auth(detail));
    }

    // Serialize cache writes after the parallel section, in job order.
    let mut fresh = fresh.into_inner().unwrap();
    fresh.sort_by_key(|(j, _, _, _)| *j);
    for (j, tweet_id, raw, parsed) in fresh {
        let job = &jobs[j];
        if let Some(raw_text) = &raw {
            cache.put(&endpoint.model, &job.hash, raw_text)?;
        }
        results[job.index] = Some(LlmResponse { tweet_id, raw, parsed });
    }

    let out: Vec<LlmResponse> = results.into_iter().map(|r| r.expect("all slots filled")).collect();
    let unclassified = out.iter().filter(|r| r.is_unclassified()).count();
    Ok((
        out,
        ClassifyStats {
            network_calls: network_calls.into_inner(),
            cache_hits,
            unclassified,
        },
    ))
}

/// CSV of unclassified tweets with their failure reasons.
pub fn write_unclassified_report(
    path: &Path,
    responses: &[LlmResponse],
) -> std::io::Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "tweet_id,reason")?;
    for r in responses {
        if let ParsedResponse::Unclassified { reason } = &r.parsed {
            writeln!(file, "{},{:?}", r.tweet_id, reason)?;
        }
    }
    file.flush()
}
