use std::time::Instant;

use super::{DecodeParams, ProtocolError, TextBackend};

pub const DEFAULT_MAX_REPAIRS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CallOutcome {
    Parsed,
    Malformed(String),
    BackendFailed(String),
}

/// One physical backend invocation made by [`retry_parse`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallRecord {
    /// 0 for the original prompt, `k` for the k-th repair.
    pub attempt: usize,
    pub prompt_chars: usize,
    pub response_chars: usize,
    pub wall_ms: u64,
    pub outcome: CallOutcome,
}

fn repair_prompt(prompt: &str, malformed: &str, error: &ProtocolError, schema: &str) -> String {
    format!(
        "{prompt}\n\
         Your previous reply could not be used ({error}). Your previous reply was:\n\
         {malformed}\n\n\
         Reply again with only the dictionary, strictly in this format:\n\
         {schema}\n"
    )
}

/// Call `backend` with `prompt` and parse the completion. On a repairable
/// error re-prompt up to `max_repairs` times, quoting the malformed output and
/// the required schema. Every invocation is reported to `observe`.
pub fn retry_parse<T>(
    backend: &dyn TextBackend,
    prompt: &str,
    schema: &str,
    params: &DecodeParams,
    max_repairs: usize,
    parse: impl Fn(&str) -> Result<T, ProtocolError>,
    observe: &mut dyn FnMut(CallRecord),
) -> Result<T, ProtocolError> {
    let mut current = prompt.to_owned();
    let mut attempt = 0;
    loop {
        let started = Instant::now();
        let result = backend.complete(&current, params);
        let wall_ms = started.elapsed().as_millis() as u64;
        let prompt_chars = current.chars().count();
        let raw = match result {
            Ok(raw) => raw,
            Err(e) => {
                observe(CallRecord {
                    attempt,
                    prompt_chars,
                    response_chars: 0,
                    wall_ms,
                    outcome: CallOutcome::BackendFailed(e.to_string()),
                });
                return Err(e.into());
            }
        };
        let response_chars = raw.chars().count();
        match parse(&raw) {
            Ok(value) => {
                observe(CallRecord {
                    attempt,
                    prompt_chars,
                    response_chars,
                    wall_ms,
                    outcome: CallOutcome::Parsed,
                });
                return Ok(value);
            }
            Err(e) => {
                observe(CallRecord {
                    attempt,
                    prompt_chars,
                    response_chars,
                    wall_ms,
                    outcome: CallOutcome::Malformed(e.to_string()),
                });
                if !e.is_repairable() || attempt >= max_repairs {
                    return Err(e);
                }
                current = repair_prompt(prompt, &raw, &e, schema);
                attempt += 1;
            }
        }
    }
}
