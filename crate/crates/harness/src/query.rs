// SPDX-License-Identifier: MIT OR Apache-2.0

//! Chat-completions client with an on-disk response cache.
//!
//! Each request carries the prompt text and the rendered PNG as a base64
//! data URL. Answered responses are cached under
//! `<cache_dir>/<sha256(model, sha256(prompt), sha256(png))>.json`, so a
//! rerun with the same inputs makes no network calls.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::QueryConfig;
use crate::error::{Error, Result};
use crate::fsio::{self, sha256_hex};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryRequest {
    pub instance_id: String,
    pub prompt: String,
    pub image_png: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Answered,
    /// Every attempt failed; `error` holds the last failure.
    Unanswered,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub instance_id: String,
    pub model: String,
    pub status: Status,
    #[serde(default)]
    pub raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub latency_ms: u64,
    /// Requests sent; 0 for cache hits and scripted responders.
    #[serde(default)]
    pub attempts: u32,
    #[serde(default)]
    pub cached: bool,
    /// SHA-256 of `raw`.
    #[serde(default)]
    pub content_hash: String,
}

impl ResponseRecord {
    pub fn answered(instance_id: &str, model: &str, raw: String) -> Self {
        ResponseRecord {
            instance_id: instance_id.into(),
            model: model.into(),
            status: Status::Answered,
            content_hash: sha256_hex(raw.as_bytes()),
            raw,
            error: None,
            latency_ms: 0,
            attempts: 0,
            cached: false,
        }
    }
}

/// Why one attempt failed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttemptError {
    pub message: String,
    pub retryable: bool,
}

/// Something that answers one request. Implemented over HTTP below and by
/// test doubles.
pub trait Backend: Sync {
    fn complete(&self, model: &str, req: &QueryRequest) -> Result<String, AttemptError>;
}

pub struct HttpBackend {
    agent: ureq::Agent,
    endpoint: String,
    api_key: Option<String>,
    thinking: Option<(String, Value)>,
}

impl HttpBackend {
    pub fn new(cfg: &QueryConfig) -> Result<Self> {
        cfg.validate()?;
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        if api_key.is_none() {
            log::warn!("{} is not set; sending requests without a bearer token", cfg.api_key_env);
        }
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build();
        Ok(HttpBackend {
            agent,
            endpoint: cfg.endpoint.clone(),
            api_key,
            thinking: cfg
                .thinking_flag
                .clone()
                .map(|flag| (flag, cfg.thinking_value.clone())),
        })
    }

    pub fn request_body(&self, model: &str, req: &QueryRequest) -> Value {
        let url = format!(
            "data:image/png;base64,{}",
            base64::engine::general_purpose::STANDARD.encode(&req.image_png)
        );
        let mut body = json!({
            "model": model,
            "temperature": 0,
            "messages": [{
                "role": "user",
                "content": [
                    {"type": "text", "text": req.prompt},
                    {"type": "image_url", "image_url": {"url": url}},
                ],
            }],
        });
        if let Some((flag, value)) = &self.thinking {
            body[flag.as_str()] = value.clone();
        }
        body
    }
}

/// Message text from a chat-completions response. Content may be a string
/// or a list of typed parts.
pub fn extract_content(resp: &Value) -> Option<String> {
    let content = resp.pointer("/choices/0/message/content")?;
    match content {
        Value::String(s) => Some(s.clone()),
        Value::Array(parts) => Some(
            parts
                .iter()
                .filter_map(|p| p.get("text").and_then(Value::as_str))
                .collect::<Vec<_>>()
                .join(""),
        ),
        _ => None,
    }
}

impl Backend for HttpBackend {
    fn complete(&self, model: &str, req: &QueryRequest) -> Result<String, AttemptError> {
        let mut call = self
            .agent
            .post(&self.endpoint)
            .set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.set("Authorization", &format!("Bearer {key}"));
        }
        let body = self.request_body(model, req).to_string();
        match call.send_string(&body) {
            Ok(resp) => {
                let text = resp.into_string().map_err(|e| AttemptError {
                    message: format!("response body: {e}"),
                    retryable: true,
                })?;
                let value: Value = serde_json::from_str(&text).map_err(|e| AttemptError {
                    message: format!("response body: {e}"),
                    retryable: false,
                })?;
                extract_content(&value).ok_or_else(|| AttemptError {
                    message: "response has no message content".into(),
                    retryable: false,
                })
            }
            Err(ureq::Error::Status(code, resp)) => {
                let text = resp.into_string().unwrap_or_default();
                Err(AttemptError {
                    message: format!("HTTP {code}: {}", text.chars().take(200).collect::<String>()),
                    retryable: code == 408 || code == 429 || code >= 500,
                })
            }
            Err(e) => Err(AttemptError {
                message: e.to_string(),
                retryable: true,
            }),
        }
    }
}

pub fn cache_key(model: &str, prompt: &str, image_png: &[u8]) -> String {
    let material = format!(
        "{model}\n{}\n{}",
        sha256_hex(prompt.as_bytes()),
        sha256_hex(image_png)
    );
    sha256_hex(material.as_bytes())
}

pub fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.json"))
}

fn backoff(cfg: &QueryConfig, retry: u32) -> Duration {
    let ms = cfg
        .backoff_ms
        .saturating_mul(1u64 << retry.min(20))
        .min(cfg.max_backoff_ms);
    Duration::from_millis(ms)
}

fn query_one(backend: &dyn Backend, cfg: &QueryConfig, req: &QueryRequest) -> ResponseRecord {
    let key = cache_key(&cfg.model, &req.prompt, &req.image_png);
    let path = cache_path(&cfg.cache_dir, &key);
    if let Ok(mut hit) = fsio::read_json::<ResponseRecord>(&path) {
        if hit.status == Status::Answered {
            hit.instance_id = req.instance_id.clone();
            hit.cached = true;
            hit.attempts = 0;
            hit.latency_ms = 0;
            return hit;
        }
    }
    let start = Instant::now();
    let mut attempts = 0;
    let last_error = loop {
        attempts += 1;
        match backend.complete(&cfg.model, req) {
            Ok(raw) => {
                let mut rec = ResponseRecord::answered(&req.instance_id, &cfg.model, raw);
                rec.latency_ms = start.elapsed().as_millis() as u64;
                rec.attempts = attempts;
                if let Err(e) = fsio::write_json(&path, &rec) {
                    log::warn!("cache write failed: {e}");
                }
                return rec;
            }
            Err(e) if e.retryable && attempts <= cfg.retries => {
                log::debug!("{}: attempt {attempts} failed: {}", req.instance_id, e.message);
                std::thread::sleep(backoff(cfg, attempts - 1));
            }
            Err(e) => break e.message,
        }
    };
    log::warn!("{}: unanswered after {attempts} attempts: {last_error}", req.instance_id);
    ResponseRecord {
        instance_id: req.instance_id.clone(),
        model: cfg.model.clone(),
        status: Status::Unanswered,
        raw: String::new(),
        error: Some(last_error),
        latency_ms: start.elapsed().as_millis() as u64,
        attempts,
        cached: false,
        content_hash: String::new(),
    }
}

/// Runs `n` requests with at most `cfg.max_inflight` in flight. `prepare`
/// builds request `k`; results come back in index order.
pub fn run_all<F>(backend: &dyn Backend, cfg: &QueryConfig, n: usize, prepare: F) -> Result<Vec<ResponseRecord>>
where
    F: Fn(usize) -> Result<QueryRequest> + Sync,
{
    cfg.validate()?;
    if cfg.model.is_empty() {
        return Err(Error::Config("no model given".into()));
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<ResponseRecord>>> = Mutex::new(vec![None; n]);
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..cfg.max_inflight.min(n.max(1)) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= n || failure.lock().expect("lock").is_some() {
                    return;
                }
                match prepare(k) {
                    Ok(req) => {
                        let rec = query_one(backend, cfg, &req);
                        slots.lock().expect("lock")[k] = Some(rec);
                    }
                    Err(e) => {
                        failure.lock().expect("lock").get_or_insert(e);
                        return;
                    }
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().expect("lock") {
        return Err(e);
    }
    Ok(slots
        .into_inner()
        .expect("lock")
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_parts_are_joined() {
        let v = json!({"choices": [{"message": {"content": [{"type": "text", "text": "a, "}, {"type": "text", "text": "b"}]}}]});
        assert_eq!(extract_content(&v).as_deref(), Some("a, b"));
        let v = json!({"choices": [{"message": {"content": "mug"}}]});
        assert_eq!(extract_content(&v).as_deref(), Some("mug"));
        assert_eq!(extract_content(&json!({})), None);
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let cfg = QueryConfig {
            backoff_ms: 100,
            max_backoff_ms: 350,
            ..QueryConfig::default()
        };
        let d: Vec<u64> = (0..4).map(|k| backoff(&cfg, k).as_millis() as u64).collect();
        assert_eq!(d, [100, 200, 350, 350]);
    }

    #[test]
    fn cache_key_depends_on_every_input() {
        let k = cache_key("m", "p", b"i");
        assert_ne!(k, cache_key("m2", "p", b"i"));
        assert_ne!(k, cache_key("m", "p2", b"i"));
        assert_ne!(k, cache_key("m", "p", b"i2"));
        assert_eq!(k, cache_key("m", "p", b"i"));
    }

    #[test]
    fn thinking_flag_is_set_in_body() {
        let cfg = QueryConfig {
            thinking_flag: Some("enable_thinking".into()),
            ..QueryConfig::default()
        };
        let b = HttpBackend::new(&cfg).unwrap();
        let body = b.request_body(
            "m",
            &QueryRequest {
                instance_id: "x".into(),
                prompt: "hi".into(),
                image_png: vec![1, 2, 3],
            },
        );
        assert_eq!(body["enable_thinking"], json!(false));
        assert_eq!(body["temperature"], json!(0));
        assert_eq!(body["messages"][0]["content"][1]["image_url"]["url"], json!("data:image/png;base64,AQID"));
    }
}
