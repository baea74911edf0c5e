//! Multiple-choice evaluation, richness/relevance metrics and needle splicing.

mod metrics;
mod needle;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ScopeConfig;
use crate::engine::{Engine, EngineError, EngineOptions, FinalResponse, Ledger};
use crate::media::MemoryCache;
use crate::pool::fan_out;
use crate::protocol::{DecodeParams, TextBackend};
use crate::sim::{ScriptedCaptioner, ScriptedReasoner, WorldSpec};

pub use metrics::{
    curve_csv, parse_relevance, relevance_score, richness_relevance_curve, shannon_entropy,
    snapshot_along, LevelRow, LevelSnapshot, RELEVANCE_SCHEMA,
};
pub use needle::{
    build_needle_haystack, plan_media_splice, Haystack, MediaNeedle, Needle, NeedleError,
    SplicePlan, SpliceSegment,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOption {
    pub label: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QARecord {
    pub id: String,
    pub video_id: String,
    pub question: String,
    pub options: Vec<AnswerOption>,
    pub answer_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    /// Ground-truth second of the evidence, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence_s: Option<u64>,
}

impl QARecord {
    pub fn validate(&self) -> Result<(), EvalError> {
        let invalid = |reason: &str| EvalError::InvalidRecord {
            id: self.id.clone(),
            reason: reason.into(),
        };
        if self.options.len() < 2 {
            return Err(invalid("fewer than two options"));
        }
        if !self.options.iter().any(|o| o.label == self.answer_label) {
            return Err(invalid("answer label is not an option label"));
        }
        Ok(())
    }

    /// Stem followed by one `L. text` line per option.
    pub fn render(&self) -> String {
        let mut out = self.question.clone();
        for o in &self.options {
            out.push('\n');
            out.push_str(&format!("{}. {}", o.label, o.text));
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty evaluation set")]
    Empty,
    #[error("QA record {id}: {reason}")]
    InvalidRecord { id: String, reason: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed QA file {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("cannot write report: {0}")]
    Report(String),
}

pub fn load_qas(path: &Path) -> Result<Vec<QARecord>, EvalError> {
    let bytes = fs::read(path).map_err(|source| EvalError::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_slice(&bytes).map_err(|source| EvalError::Json {
        path: path.to_owned(),
        source,
    })
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("video {0} is not available")]
    MissingVideo(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{0}")]
    Other(String),
}

/// Answers one rendered question about one video.
pub trait Pipeline: Sync {
    fn ask(&self, video_id: &str, question: &str) -> Result<FinalResponse, PipelineError>;
}

/// Scripted agents over in-memory worlds.
pub struct SimPipeline {
    worlds: HashMap<String, WorldSpec>,
    scope: ScopeConfig,
    options: EngineOptions,
    cache: Option<MemoryCache>,
}

impl SimPipeline {
    pub fn new(worlds: impl IntoIterator<Item = WorldSpec>, scope: ScopeConfig) -> Self {
        let worlds = worlds
            .into_iter()
            .map(|w| (w.video_id.clone(), w))
            .collect();
        Self {
            worlds,
            scope,
            options: EngineOptions {
                record_timing: false,
                ..EngineOptions::default()
            },
            cache: None,
        }
    }

    pub fn with_options(mut self, options: EngineOptions) -> Self {
        self.options = options;
        self
    }

    pub fn with_cache(mut self, cache: MemoryCache) -> Self {
        self.cache = Some(cache);
        self
    }
}

impl Pipeline for SimPipeline {
    fn ask(&self, video_id: &str, question: &str) -> Result<FinalResponse, PipelineError> {
        let world = self
            .worlds
            .get(video_id)
            .ok_or_else(|| PipelineError::MissingVideo(video_id.into()))?;
        let captioner = ScriptedCaptioner::new(world.clone(), self.scope.clone());
        let mut engine = Engine::new(self.scope.clone(), &ScriptedReasoner, &captioner)
            .with_options(self.options.clone());
        if let Some(cache) = &self.cache {
            engine = engine.with_cache(cache.clone());
        }
        Ok(engine.run(&world.meta(), question)?)
    }
}

/// Maps a free-text answer to an option label.
pub trait AnswerMatcher: Sync {
    fn label(&self, answer: &str, qa: &QARecord) -> Option<String>;
}

/// The first token, delimited by non-alphanumerics, equal to an option label.
#[derive(Debug, Clone, Copy, Default)]
pub struct FirstLabel;

impl AnswerMatcher for FirstLabel {
    fn label(&self, answer: &str, qa: &QARecord) -> Option<String> {
        answer
            .split(|c: char| !c.is_alphanumeric())
            .find(|t| qa.options.iter().any(|o| o.label == *t))
            .map(str::to_owned)
    }
}

/// Asks a model which option the answer corresponds to.
pub struct JudgeMatcher<'a> {
    pub llm: &'a dyn TextBackend,
}

impl AnswerMatcher for JudgeMatcher<'_> {
    fn label(&self, answer: &str, qa: &QARecord) -> Option<String> {
        let prompt = format!(
            "{}\n\nA respondent answered: {answer}\n\nWhich option does this answer choose? Reply with only the option label, or None if it matches no option.\n",
            qa.render()
        );
        let reply = self.llm.complete(&prompt, &DecodeParams::default()).ok()?;
        FirstLabel.label(&reply, qa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Correct,
    Incorrect,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordOutcome {
    pub id: String,
    pub video_id: String,
    pub category: Option<String>,
    pub status: OutcomeStatus,
    pub answer_label: String,
    pub predicted_label: Option<String>,
    pub answer: Option<String>,
    pub confident: Option<bool>,
    pub forced: Option<bool>,
    pub iterations_used: Option<usize>,
    /// Logical reasoning calls for this question.
    pub llm_calls: Option<u64>,
    pub evidence_contains_truth: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub scored: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub strict: bool,
    pub records: usize,
    /// Records in the accuracy denominator.
    pub scored: usize,
    pub correct: usize,
    pub errors: usize,
    pub accuracy: f64,
    pub per_category: BTreeMap<String, CategoryStats>,
    pub ledger: Ledger,
    pub mean_llm_calls: f64,
    pub max_llm_calls: u64,
    pub outcomes: Vec<RecordOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// Count errored records as incorrect rather than dropping them.
    pub strict: bool,
    pub workers: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            strict: true,
            workers: 8,
        }
    }
}

fn evaluate(
    qa: &QARecord,
    pipeline: &dyn Pipeline,
    matcher: &dyn AnswerMatcher,
) -> (RecordOutcome, Ledger) {
    let mut outcome = RecordOutcome {
        id: qa.id.clone(),
        video_id: qa.video_id.clone(),
        category: qa.category.clone(),
        status: OutcomeStatus::Error,
        answer_label: qa.answer_label.clone(),
        predicted_label: None,
        answer: None,
        confident: None,
        forced: None,
        iterations_used: None,
        llm_calls: None,
        evidence_contains_truth: None,
        error: None,
    };
    match pipeline.ask(&qa.video_id, &qa.render()) {
        Ok(r) => {
            let predicted = if r.confident {
                matcher.label(&r.answer, qa)
            } else {
                None
            };
            outcome.status = if predicted.as_deref() == Some(qa.answer_label.as_str()) {
                OutcomeStatus::Correct
            } else {
                OutcomeStatus::Incorrect
            };
            outcome.evidence_contains_truth = qa
                .evidence_s
                .map(|s| r.evidence_periods.iter().any(|p| p.contains_second(s)));
            outcome.predicted_label = predicted;
            outcome.answer = Some(r.answer);
            outcome.confident = Some(r.confident);
            outcome.forced = Some(r.forced);
            outcome.iterations_used = Some(r.iterations_used);
            outcome.llm_calls = Some(r.ledger.reasoning_logical);
            (outcome, r.ledger)
        }
        Err(e) => {
            outcome.error = Some(e.to_string());
            (outcome, Ledger::default())
        }
    }
}

/// Answer every record through `pipeline` and score it. Per-record failures
/// are recorded and the run continues.
pub fn run_eval(
    qas: &[QARecord],
    pipeline: &dyn Pipeline,
    matcher: &dyn AnswerMatcher,
    options: EvalOptions,
) -> Result<EvalReport, EvalError> {
    if qas.is_empty() {
        return Err(EvalError::Empty);
    }
    for qa in qas {
        qa.validate()?;
    }
    let results = fan_out(qas, options.workers, |qa| evaluate(qa, pipeline, matcher));

    let mut ledger = Ledger::default();
    let mut per_category: BTreeMap<String, CategoryStats> = BTreeMap::new();
    let (mut scored, mut correct, mut errors) = (0, 0, 0);
    let mut calls = Vec::new();
    let mut outcomes = Vec::with_capacity(results.len());
    for (outcome, l) in results {
        ledger.add(&l);
        calls.extend(outcome.llm_calls);
        let counted = outcome.status != OutcomeStatus::Error || options.strict;
        errors += usize::from(outcome.status == OutcomeStatus::Error);
        if counted {
            let hit = usize::from(outcome.status == OutcomeStatus::Correct);
            scored += 1;
            correct += hit;
            let cat = per_category
                .entry(
                    outcome
                        .category
                        .clone()
                        .unwrap_or_else(|| "uncategorized".into()),
                )
                .or_default();
            cat.scored += 1;
            cat.correct += hit;
        }
        outcomes.push(outcome);
    }
    let ratio = |c: usize, n: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
    for c in per_category.values_mut() {
        c.accuracy = ratio(c.correct, c.scored);
    }
    Ok(EvalReport {
        strict: options.strict,
        records: qas.len(),
        scored,
        correct,
        errors,
        accuracy: ratio(correct, scored),
        per_category,
        ledger,
        mean_llm_calls: if calls.is_empty() {
            0.0
        } else {
            calls.iter().sum::<u64>() as f64 / calls.len() as f64
        },
        max_llm_calls: calls.iter().copied().max().unwrap_or(0),
        outcomes,
    })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    id: &'a str,
    video_id: &'a str,
    category: &'a str,
    status: OutcomeStatus,
    answer_label: &'a str,
    predicted_label: &'a str,
    confident: Option<bool>,
    forced: Option<bool>,
    iterations_used: Option<usize>,
    llm_calls: Option<u64>,
    error: &'a str,
}

impl EvalReport {
    pub fn to_csv(&self) -> Result<String, EvalError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for o in &self.outcomes {
            w.serialize(CsvRow {
                id: &o.id,
                video_id: &o.video_id,
                category: o.category.as_deref().unwrap_or(""),
                status: o.status,
                answer_label: &o.answer_label,
                predicted_label: o.predicted_label.as_deref().unwrap_or(""),
                confident: o.confident,
                forced: o.forced,
                iterations_used: o.iterations_used,
                llm_calls: o.llm_calls,
                error: o.error.as_deref().unwrap_or(""),
            })
            .map_err(|e| EvalError::Report(e.to_string()))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| EvalError::Report(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| EvalError::Report(e.to_string()))
    }

    /// Write `report.json` and `report.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf), EvalError> {
        let io = |path: &Path| {
            let path = path.to_owned();
            move |source| EvalError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let json = dir.join("report.json");
        let csv = dir.join("report.csv");
        let body = serde_json::to_vec_pretty(self).map_err(|e| EvalError::Report(e.to_string()))?;
        fs::write(&json, body).map_err(io(&json))?;
        fs::write(&csv, self.to_csv()?).map_err(io(&csv))?;
        Ok((json, csv))
    }
}
