use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{evaluate_response, EvalRecord};
use crate::error::{Error, Result};
use crate::qaformat::PromptTemplates;
use crate::sample::PuzzleSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEndpoint {
    /// Base URL; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub token_env: String,
    pub timeout: Duration,
    pub concurrency: usize,
    pub max_attempts: u32,
    pub backoff: Duration,
}

impl ModelEndpoint {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, token_env: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            token_env: token_env.into(),
            timeout: Duration::from_secs(120),
            concurrency: 4,
            max_attempts: 4,
            backoff: Duration::from_millis(500),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.concurrency == 0 {
            return Err(Error::Config("concurrency must be at least 1".into()));
        }
        if self.timeout.is_zero() {
            return Err(Error::Config("timeout must be positive".into()));
        }
        if self.max_attempts == 0 {
            return Err(Error::Config("max_attempts must be at least 1".into()));
        }
        Ok(())
    }

    fn token(&self) -> Option<String> {
        std::env::var(&self.token_env).ok().filter(|t| !t.is_empty())
    }
}

/// Result of one query after retries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryOutcome {
    /// `None` when every attempt failed.
    pub text: Option<String>,
    pub retries: u32,
    pub elapsed_ms: u64,
}

enum Failure {
    Transient(String),
    Permanent(String),
}

pub struct ChatClient {
    endpoint: ModelEndpoint,
    agent: ureq::Agent,
    token: Option<String>,
}

impl ChatClient {
    pub fn new(endpoint: ModelEndpoint) -> Result<Self> {
        endpoint.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(endpoint.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let token = endpoint.token();
        Ok(Self { endpoint, agent, token })
    }

    pub fn endpoint(&self) -> &ModelEndpoint {
        &self.endpoint
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{path}", self.endpoint.base_url)
    }

    /// Checks credentials with `GET {base}/models` before any sample is sent.
    pub fn preflight(&self) -> Result<()> {
        let url = self.url("models");
        let mut req = self.agent.get(&url);
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let resp = req.call().map_err(|e| Error::Endpoint {
            url: url.clone(),
            message: e.to_string(),
        })?;
        let status = resp.status().as_u16();
        match status {
            200..=299 => Ok(()),
            401 | 403 => Err(Error::Auth { url, status }),
            _ => Err(Error::Endpoint {
                url,
                message: format!("preflight returned HTTP {status}"),
            }),
        }
    }

    fn attempt(&self, body: &Value) -> std::result::Result<String, Failure> {
        let url = self.url("chat/completions");
        let mut req = self.agent.post(&url).header("Content-Type", "application/json");
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req.send(body.to_string().as_bytes()).map_err(|e| Failure::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Failure::Transient(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            return Err(Failure::Permanent(format!("HTTP {status}")));
        }
        let text = resp.body_mut().read_to_string().map_err(|e| Failure::Transient(e.to_string()))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| Failure::Permanent(format!("bad JSON: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Failure::Permanent("response has no choices[0].message.content".into()))
    }

    /// Sends `body`, retrying transient failures with exponential backoff.
    pub fn send_with_retries(&self, body: &Value) -> QueryOutcome {
        let start = Instant::now();
        let mut retries = 0;
        let mut text = None;
        for attempt in 0..self.endpoint.max_attempts {
            match self.attempt(body) {
                Ok(t) => {
                    text = Some(t);
                    break;
                }
                Err(Failure::Permanent(msg)) => {
                    log::warn!("permanent failure: {msg}");
                    break;
                }
                Err(Failure::Transient(msg)) => {
                    if attempt + 1 == self.endpoint.max_attempts {
                        log::warn!("giving up after {} attempts: {msg}", attempt + 1);
                        break;
                    }
                    retries += 1;
                    log::info!("retry {retries} after: {msg}");
                    std::thread::sleep(self.endpoint.backoff * 2u32.saturating_pow(attempt));
                }
            }
        }
        QueryOutcome {
            text,
            retries,
            elapsed_ms: start.elapsed().as_millis() as u64,
        }
    }
}

/// Builds the chat-completion request body for `sample`, embedding every
/// attached image as a base64 PNG data URL.
pub fn request_body(model: &str, dataset: &Path, sample: &PuzzleSample, templates: &PromptTemplates) -> Result<Value> {
    let prompt = templates.render_prompt(sample);
    let mut content = vec![json!({"type": "text", "text": prompt.text})];
    for rel in &prompt.images {
        let path = dataset.join(rel);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let b64 = base64::engine::general_purpose::STANDARD.encode(bytes);
        content.push(json!({"type": "image_url", "image_url": {"url": format!("data:image/png;base64,{b64}")}}));
    }
    Ok(json!({
        "model": model,
        "temperature": 0,
        "messages": [{"role": "user", "content": content}],
    }))
}

pub fn query_model(client: &ChatClient, dataset: &Path, sample: &PuzzleSample, templates: &PromptTemplates) -> Result<QueryOutcome> {
    let body = request_body(&client.endpoint.model, dataset, sample, templates)?;
    Ok(client.send_with_retries(&body))
}

/// Queries every sample with bounded concurrency. Authentication is checked
/// first; individual request failures become "no response" records.
pub fn run_endpoint(
    client: &ChatClient,
    dataset: &Path,
    samples: &[PuzzleSample],
    templates: &PromptTemplates,
) -> Result<Vec<EvalRecord>> {
    client.preflight()?;
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<EvalRecord>>> = Mutex::new(vec![None; samples.len()]);
    let first_error: Mutex<Option<Error>> = Mutex::new(None);
    let model = client.endpoint.model.clone();
    let workers = client.endpoint.concurrency.min(samples.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= samples.len() || first_error.lock().expect("lock").is_some() {
                    break;
                }
                let s = &samples[i];
                match query_model(client, dataset, s, templates) {
                    Ok(out) => {
                        let mut rec = evaluate_response(s, &model, out.text);
                        rec.retries = out.retries;
                        rec.elapsed_ms = Some(out.elapsed_ms);
                        slots.lock().expect("lock")[i] = Some(rec);
                    }
                    Err(e) => {
                        first_error.lock().expect("lock").get_or_insert(e);
                    }
                }
            });
        }
    });
    if let Some(e) = first_error.into_inner().expect("lock") {
        return Err(e);
    }
    Ok(slots.into_inner().expect("lock").into_iter().flatten().collect())
}

#[derive(Deserialize)]
struct ResponseLine {
    #[serde(alias = "id")]
    sample_id: String,
    #[serde(alias = "response")]
    raw_response: Option<String>,
}

/// Offline mode: responses pre-recorded as JSON lines
/// `{"sample_id": ..., "raw_response": ...}`. Samples without a line are
/// recorded as "no response".
pub fn run_responses_file(path: &Path, model: &str, samples: &[PuzzleSample]) -> Result<Vec<EvalRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut responses: HashMap<String, Option<String>> = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: ResponseLine = serde_json::from_str(&line).map_err(|e| Error::MalformedEntry {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        responses.insert(r.sample_id, r.raw_response);
    }
    let known: std::collections::HashSet<&str> = samples.iter().map(|s| s.id.as_str()).collect();
    if let Some(orphan) = responses.keys().find(|k| !known.contains(k.as_str())) {
        return Err(Error::OrphanRecord(orphan.clone()));
    }
    Ok(samples
        .iter()
        .map(|s| evaluate_response(s, model, responses.get(&s.id).cloned().flatten()))
        .collect())
}
