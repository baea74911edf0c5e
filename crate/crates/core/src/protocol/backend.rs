use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Fps;
use crate::media::MediaError;
use crate::memory::{TimePeriod, VideoMeta};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed backend response: {0}")]
    Decode(String),
    #[error("captioning returned an empty description")]
    EmptyCaption,
    #[error("unrecognized prompt: {0}")]
    UnknownTemplate(String),
    #[error(transparent)]
    Media(#[from] MediaError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: None,
        }
    }
}

/// One captioning job: describe `period` of `video`, sampled at `fps`,
/// following `instruction`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipRequest {
    pub video: VideoMeta,
    pub period: TimePeriod,
    pub fps: Fps,
    pub instruction: String,
}

/// The reasoning model (LLM).
pub trait TextBackend: Send + Sync {
    fn complete(&self, prompt: &str, params: &DecodeParams) -> Result<String, BackendError>;
}

/// The captioning model (MLLM).
pub trait CaptionBackend: Send + Sync {
    fn caption(&self, request: &ClipRequest) -> Result<String, BackendError>;
}

impl<T: TextBackend + ?Sized> TextBackend for &T {
    fn complete(&self, prompt: &str, params: &DecodeParams) -> Result<String, BackendError> {
        (**self).complete(prompt, params)
    }
}

impl<T: TextBackend + ?Sized> TextBackend for Arc<T> {
    fn complete(&self, prompt: &str, params: &DecodeParams) -> Result<String, BackendError> {
        (**self).complete(prompt, params)
    }
}

impl<T: TextBackend + ?Sized> TextBackend for Box<T> {
    fn complete(&self, prompt: &str, params: &DecodeParams) -> Result<String, BackendError> {
        (**self).complete(prompt, params)
    }
}

impl<T: CaptionBackend + ?Sized> CaptionBackend for &T {
    fn caption(&self, request: &ClipRequest) -> Result<String, BackendError> {
        (**self).caption(request)
    }
}

impl<T: CaptionBackend + ?Sized> CaptionBackend for Arc<T> {
    fn caption(&self, request: &ClipRequest) -> Result<String, BackendError> {
        (**self).caption(request)
    }
}

impl<T: CaptionBackend + ?Sized> CaptionBackend for Box<T> {
    fn caption(&self, request: &ClipRequest) -> Result<String, BackendError> {
        (**self).caption(request)
    }
}

/// Atomic invocation counter.
#[derive(Debug, Default)]
pub struct CallLedger(AtomicU64);

impl CallLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self) -> u64 {
        self.0.fetch_add(1, Ordering::SeqCst) + 1
    }

    pub fn count(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

/// Wraps a backend and counts every invocation, successful or not.
#[derive(Debug, Default)]
pub struct Metered<B> {
    inner: B,
    ledger: CallLedger,
}

impl<B> Metered<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            ledger: CallLedger::new(),
        }
    }

    pub fn calls(&self) -> u64 {
        self.ledger.count()
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: TextBackend> TextBackend for Metered<B> {
    fn complete(&self, prompt: &str, params: &DecodeParams) -> Result<String, BackendError> {
        self.ledger.record();
        self.inner.complete(prompt, params)
    }
}

impl<B: CaptionBackend> CaptionBackend for Metered<B> {
    fn caption(&self, request: &ClipRequest) -> Result<String, BackendError> {
        self.ledger.record();
        self.inner.caption(request)
    }
}
