//! Agent roles: prompt templates, strict response parsers, repair retries and
//! the two pluggable model backends (text reasoning and clip captioning).

mod backend;
pub mod http;
mod literal;
mod parse;
mod prompts;
mod retry;

pub use backend::{
    BackendError, CallLedger, CaptionBackend, ClipRequest, DecodeParams, Metered, TextBackend,
};
pub use literal::{extract_dictionary, Literal};
pub use parse::{
    parse_answer, parse_init_localization, parse_locate_and_instruct, snap_period, AnswerResponse,
    InitLocalizationResponse, LocateAndInstructResponse, NO_ANSWER,
};
pub use prompts::{
    number_word, render_answer_prompt, render_init_localization_prompt,
    render_locate_and_instruct_prompt, render_relevance_prompt, ANSWER_SCHEMA, ANSWER_SENTINEL,
    COARSE_CAPTION_INSTRUCTION, FORCED_SENTINEL, INIT_LOCALIZATION_SCHEMA,
    INIT_LOCALIZATION_SENTINEL, LOCATE_SCHEMA, LOCATE_SENTINEL, RELEVANCE_SENTINEL,
};
pub use retry::{retry_parse, CallOutcome, CallRecord, DEFAULT_MAX_REPAIRS};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("no dictionary literal found in response")]
    NoDictionary,
    #[error("missing required key {0:?}")]
    MissingKey(&'static str),
    #[error("bad value for {key:?}: {reason}")]
    BadValue { key: &'static str, reason: String },
    #[error("{0}")]
    Cardinality(String),
    #[error("inconsistent response: {0}")]
    Invariant(String),
    #[error("no score in the form \"Scoring result: X points\"")]
    NoScore,
    #[error("score {0} outside 1..=5")]
    ScoreRange(i64),
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("period ({start}, {end}) cannot be snapped to any candidate period")]
    OutOfRange { start: u64, end: u64 },
    #[error("template error: {0}")]
    Template(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

impl ProtocolError {
    /// Errors that a re-prompt may fix.
    pub fn is_repairable(&self) -> bool {
        matches!(
            self,
            ProtocolError::Parse(_) | ProtocolError::OutOfRange { .. }
        )
    }
}
