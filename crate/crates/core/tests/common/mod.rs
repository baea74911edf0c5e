#![allow(dead_code)]

use std::sync::Mutex;

use lucy_core::protocol::{BackendError, CaptionBackend, ClipRequest, DecodeParams, TextBackend};

/// Text backend driven by a closure over the prompt.
pub struct FnText<F>(pub F);

impl<F: Fn(&str) -> String + Send + Sync> TextBackend for FnText<F> {
    fn complete(&self, prompt: &str, _: &DecodeParams) -> Result<String, BackendError> {
        Ok((self.0)(prompt))
    }
}

/// Caption backend returning "caption <start>-<end>" and remembering requests.
#[derive(Default)]
pub struct EchoCaptioner {
    pub seen: Mutex<Vec<ClipRequest>>,
    pub fail_at: Option<u64>,
}

impl CaptionBackend for EchoCaptioner {
    fn caption(&self, r: &ClipRequest) -> Result<String, BackendError> {
        self.seen.lock().unwrap().push(r.clone());
        if self.fail_at == Some(r.period.start_s()) {
            return Err(BackendError::Transport("boom".into()));
        }
        Ok(format!(
            "caption {}-{}",
            r.period.start_s(),
            r.period.end_s()
        ))
    }
}

pub mod checks;
pub mod stub;
