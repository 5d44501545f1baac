use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::template::TemplateId;
use crate::verdict::{parse_verdict, Verdict};

pub const KEY_ENV: &str = "SCENEWATCH_VLM_KEY";
pub const DEFAULT_CONCURRENCY: usize = 2;
const COMPLETIONS_PATH: &str = "/v1/chat/completions";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    /// Server base URL, or the full completions URL.
    pub url: String,
    pub model: String,
    /// Environment variable holding a bearer token, if any.
    pub api_key_env: String,
    pub timeout_ms: u64,
    pub max_tokens: u32,
    /// Extra attempts after a transport failure.
    pub retries: u32,
    /// First retry delay; doubles per retry.
    pub backoff_ms: u64,
    pub max_concurrency: usize,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            url: "http://127.0.0.1:8000".into(),
            model: "imp-v1-3b".into(),
            api_key_env: KEY_ENV.into(),
            timeout_ms: 60_000,
            max_tokens: 100,
            retries: 2,
            backoff_ms: 250,
            max_concurrency: DEFAULT_CONCURRENCY,
        }
    }
}

impl EndpointConfig {
    pub fn with_url(url: impl Into<String>) -> Self {
        Self { url: url.into(), ..Self::default() }
    }

    pub fn completions_url(&self) -> String {
        let base = self.url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}{COMPLETIONS_PATH}")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentRecord {
    pub scene_id: String,
    pub template_id: TemplateId,
    pub raw_response: String,
    pub verdict: Verdict,
    pub latency_ms: u64,
    pub endpoint: String,
    pub model: String,
    pub max_new_tokens: u32,
}

/// Counting gate bounding in-flight requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("gate poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("gate poisoned");
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("gate poisoned") += 1;
        self.0.cv.notify_one();
    }
}

/// Chat-completions client for one endpoint. Shareable across threads.
pub struct Client {
    config: EndpointConfig,
    agent: ureq::Agent,
    gate: Gate,
}

fn mime_for(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("jpg") | Some("jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        _ => "image/png",
    }
}

/// Pulls the assistant text out of a completions response.
fn response_text(body: &str) -> Result<String> {
    let v: Value = serde_json::from_str(body).map_err(|e| Error::ResponseSchemaError(format!("not JSON: {e}")))?;
    let content = v
        .pointer("/choices/0/message/content")
        .ok_or_else(|| Error::ResponseSchemaError("missing choices[0].message.content".into()))?;
    match content {
        Value::String(s) => Ok(s.clone()),
        Value::Array(parts) => {
            let texts: Vec<&str> = parts.iter().filter_map(|p| p.get("text").and_then(Value::as_str)).collect();
            if texts.is_empty() {
                Err(Error::ResponseSchemaError("content parts carry no text".into()))
            } else {
                Ok(texts.concat())
            }
        }
        _ => Err(Error::ResponseSchemaError("content is neither a string nor a part list".into())),
    }
}

impl Client {
    pub fn new(config: EndpointConfig) -> Result<Self> {
        if config.max_concurrency == 0 {
            return Err(Error::InvalidConfig("max_concurrency must be at least 1".into()));
        }
        if !config.url.starts_with("http://") && !config.url.starts_with("https://") {
            return Err(Error::InvalidConfig(format!("`{}` is not an http(s) URL", config.url)));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        let gate = Gate { free: Mutex::new(config.max_concurrency), cv: Condvar::new() };
        Ok(Self { config, agent, gate })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    pub fn request_body(&self, prompt: &str, image: &[u8], mime: &str) -> Value {
        let data = base64::engine::general_purpose::STANDARD.encode(image);
        json!({
            "model": self.config.model,
            "messages": [{
                "role": "user",
                "content": [
                    {"type": "text", "text": prompt},
                    {"type": "image_url", "image_url": {"url": format!("data:{mime};base64,{data}")}},
                ],
            }],
            "max_tokens": self.config.max_tokens,
            "temperature": 0,
        })
    }

    /// Sends `body`, retrying transport failures with exponential backoff.
    /// Returns the assistant text.
    pub fn complete(&self, body: &Value) -> Result<String> {
        let _permit = self.gate.acquire();
        let url = self.config.completions_url();
        let key = std::env::var(&self.config.api_key_env).ok().filter(|k| !k.is_empty());
        let attempts = self.config.retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(self.config.backoff_ms << (attempt - 1)));
            }
            let mut req = self.agent.post(&url).header("Content-Type", "application/json");
            if let Some(k) = &key {
                req = req.header("Authorization", format!("Bearer {k}"));
            }
            let mut resp = match req.send_json(body) {
                Ok(r) => r,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            let status = resp.status().as_u16();
            let text = match resp.body_mut().read_to_string() {
                Ok(t) => t,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            if !(200..300).contains(&status) {
                return Err(Error::EndpointError { status, body: text });
            }
            return response_text(&text);
        }
        Err(Error::TransportError { attempts, message: last })
    }

    /// Asks the template's question about one scene image.
    pub fn assess(&self, scene_id: &str, image_path: &Path, template: TemplateId) -> Result<AssessmentRecord> {
        let image = std::fs::read(image_path).map_err(|e| Error::Io { path: image_path.to_path_buf(), source: e })?;
        let body = self.request_body(template.template().text, &image, mime_for(image_path));
        let start = Instant::now();
        let raw = self.complete(&body)?;
        Ok(AssessmentRecord {
            scene_id: scene_id.to_string(),
            template_id: template,
            verdict: parse_verdict(&raw),
            raw_response: raw,
            latency_ms: start.elapsed().as_millis() as u64,
            endpoint: self.config.completions_url(),
            model: self.config.model.clone(),
            max_new_tokens: self.config.max_tokens,
        })
    }
}

/// Appends one JSON line to an assessment log.
pub fn append_record(path: &Path, record: &AssessmentRecord) -> Result<()> {
    let io = |e| Error::Io { path: PathBuf::from(path), source: e };
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut line = serde_json::to_string(record).expect("record serializes");
    line.push('\n');
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    f.write_all(line.as_bytes()).map_err(io)
}
