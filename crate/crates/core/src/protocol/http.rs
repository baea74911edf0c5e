//! OpenAI-compatible `/v1/chat/completions` clients for both roles.

use std::thread;
use std::time::Duration;

use base64::Engine as _;
use serde_json::{json, Value};

use super::{BackendError, CaptionBackend, ClipRequest, DecodeParams, TextBackend};
use crate::media::FrameExtractor;

pub const API_KEY_ENV: &str = "LUCY_API_KEY";

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Retries after the first attempt on 5xx / transport failures.
    pub max_retries: u32,
    pub backoff: Duration,
}

impl HttpConfig {
    /// Bearer token comes from `LUCY_API_KEY` when set.
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            timeout: Duration::from_secs(300),
            max_retries: 3,
            backoff: Duration::from_millis(500),
        }
    }

    pub fn endpoint(&self) -> String {
        format!(
            "{}/v1/chat/completions",
            self.base_url.trim_end_matches('/')
        )
    }
}

struct ChatClient {
    http: reqwest::blocking::Client,
    config: HttpConfig,
}

impl ChatClient {
    fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self { http, config })
    }

    fn post(&self, body: &Value) -> Result<String, BackendError> {
        let url = self.config.endpoint();
        let mut attempt = 0u32;
        loop {
            let mut req = self.http.post(&url).json(body);
            if let Some(key) = &self.config.api_key {
                req = req.header("Authorization", format!("Bearer {key}"));
            }
            let err = match req.send() {
                Ok(resp) if resp.status().is_success() => {
                    let v: Value = resp
                        .json()
                        .map_err(|e| BackendError::Decode(e.to_string()))?;
                    return extract_content(&v);
                }
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    let body = resp.text().unwrap_or_default();
                    let e = BackendError::Status { status, body };
                    if status < 500 {
                        return Err(e);
                    }
                    e
                }
                Err(e) => BackendError::Transport(e.to_string()),
            };
            if attempt >= self.config.max_retries {
                return Err(err);
            }
            let wait = self.config.backoff * 2u32.pow(attempt);
            log::warn!(
                "chat request failed ({err}); retry {} in {wait:?}",
                attempt + 1
            );
            thread::sleep(wait);
            attempt += 1;
        }
    }
}

fn extract_content(v: &Value) -> Result<String, BackendError> {
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| BackendError::Decode("missing choices[0].message.content".into()))
}

pub struct HttpTextBackend {
    client: ChatClient,
}

impl HttpTextBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        Ok(Self {
            client: ChatClient::new(config)?,
        })
    }

    pub fn request_body(&self, prompt: &str, params: &DecodeParams) -> Value {
        let mut body = json!({
            "model": self.client.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
        });
        if let Some(max) = params.max_tokens {
            body["max_tokens"] = json!(max);
        }
        body
    }
}

impl TextBackend for HttpTextBackend {
    fn complete(&self, prompt: &str, params: &DecodeParams) -> Result<String, BackendError> {
        self.client.post(&self.request_body(prompt, params))
    }
}

/// Sends the instruction followed by the clip's frames as base64 JPEG parts.
pub struct HttpCaptionBackend {
    client: ChatClient,
    frames: FrameExtractor,
    params: DecodeParams,
}

impl HttpCaptionBackend {
    pub fn new(config: HttpConfig, frames: FrameExtractor) -> Result<Self, BackendError> {
        Ok(Self {
            client: ChatClient::new(config)?,
            frames,
            params: DecodeParams::default(),
        })
    }

    pub fn request_body(&self, instruction: &str, jpegs: &[Vec<u8>]) -> Value {
        let mut content = vec![json!({"type": "text", "text": instruction})];
        for jpeg in jpegs {
            let b64 = base64::engine::general_purpose::STANDARD.encode(jpeg);
            content.push(json!({
                "type": "image_url",
                "image_url": {"url": format!("data:image/jpeg;base64,{b64}")},
            }));
        }
        json!({
            "model": self.client.config.model,
            "messages": [{"role": "user", "content": content}],
            "temperature": self.params.temperature,
        })
    }
}

impl CaptionBackend for HttpCaptionBackend {
    fn caption(&self, request: &ClipRequest) -> Result<String, BackendError> {
        let set = self
            .frames
            .extract_frames(&request.video, request.period, request.fps)?;
        let text = self
            .client
            .post(&self.request_body(&request.instruction, &set.frames))?;
        if text.trim().is_empty() {
            return Err(BackendError::EmptyCaption);
        }
        Ok(text)
    }
}
