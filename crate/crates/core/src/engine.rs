//! The iterative backtracking loop: coarse memory, sparse initialization,
//! then question-guided descent until the answering agent is confident.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::ScopeConfig;
use crate::media::{CacheError, MemoryCache};
use crate::memory::{
    divide, divide_period, neighborhood_expand, ClipDivision, MemoryEntry, MemoryLevel, MemoryList,
    TimePeriod, VideoMeta,
};
use crate::pool::fan_out;
use crate::protocol::{
    parse_answer, parse_init_localization, parse_locate_and_instruct, render_answer_prompt,
    render_init_localization_prompt, render_locate_and_instruct_prompt, retry_parse,
    AnswerResponse, BackendError, CallOutcome, CallRecord, CaptionBackend, ClipRequest,
    DecodeParams, ProtocolError, TextBackend, ANSWER_SCHEMA, COARSE_CAPTION_INSTRUCTION,
    DEFAULT_MAX_REPAIRS, INIT_LOCALIZATION_SCHEMA, LOCATE_SCHEMA, NO_ANSWER,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("captioning {period} failed: {source}")]
    Caption {
        period: TimePeriod,
        source: BackendError,
    },
    #[error("reasoning backend failed: {0}")]
    Backend(BackendError),
    #[error("no unexplored coarse or fine period remains")]
    Exhausted,
    #[error("prompt needs {chars} characters, over the {budget} character budget")]
    Budget { chars: usize, budget: usize },
    #[error("template error: {0}")]
    Template(String),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

impl EngineError {
    fn from_protocol(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Backend(b) => EngineError::Backend(b),
            other => EngineError::Template(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineOptions {
    /// Bound on concurrent caption calls within one step.
    pub workers: usize,
    pub context_budget_chars: usize,
    pub max_repairs: usize,
    pub decode: DecodeParams,
    /// Deepest level the loop may create; `Coarse` disables exploration.
    pub depth_cap: MemoryLevel,
    /// When false every `wall_ms` is zero, making traces byte-reproducible.
    pub record_timing: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            workers: 8,
            context_budget_chars: 200_000,
            max_repairs: DEFAULT_MAX_REPAIRS,
            decode: DecodeParams::default(),
            depth_cap: MemoryLevel::UltraFine,
            record_timing: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Init,
    Locate,
    Caption,
    Answer,
    ForcedAnswer,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopEvent {
    pub kind: EventKind,
    pub iteration: usize,
    pub period: Option<TimePeriod>,
    pub level: Option<MemoryLevel>,
    pub prompt_chars: usize,
    pub response_chars: usize,
    pub wall_ms: u64,
    /// Repair attempt index for reasoning calls.
    #[serde(default)]
    pub attempt: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Backend call counts for one run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    /// Physical reasoning calls, repairs included.
    pub reasoning_calls: u64,
    /// One per agent consultation, repairs excluded.
    pub reasoning_logical: u64,
    pub repair_calls: u64,
    pub caption_calls: u64,
    pub cache_hits: u64,
}

impl Ledger {
    pub fn add(&mut self, other: &Ledger) {
        self.reasoning_calls += other.reasoning_calls;
        self.reasoning_logical += other.reasoning_logical;
        self.repair_calls += other.repair_calls;
        self.caption_calls += other.caption_calls;
        self.cache_hits += other.cache_hits;
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoopState {
    pub cm: MemoryList,
    pub explored: BTreeSet<TimePeriod>,
    pub iteration: usize,
    pub ledger: Ledger,
    pub trace: Vec<LoopEvent>,
}

/// Periods kept by sparse initialization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevantPeriodSet {
    pub periods: BTreeSet<TimePeriod>,
    /// False when the localization agent declined (or failed) and the full
    /// coarse memory was kept.
    pub sparse: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    Explored {
        period: TimePeriod,
        level: MemoryLevel,
        children: usize,
    },
    /// Localization failed after repairs; memory untouched.
    LocateFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalResponse {
    pub answer: String,
    pub evidence_periods: Vec<TimePeriod>,
    pub confident: bool,
    /// True when the answer came from the forced final round.
    pub forced: bool,
    pub reason: String,
    pub iterations_used: usize,
    pub relevant_periods: RelevantPeriodSet,
    pub ledger: Ledger,
    pub trace: Vec<LoopEvent>,
    pub memory: MemoryList,
}

/// Upper bound on logical reasoning calls for one question.
pub fn reasoning_call_bound(max_iterations: usize) -> usize {
    2 + 2 * max_iterations + 1
}

pub fn question_hash(question: &str) -> String {
    let digest = Sha256::digest(question.as_bytes());
    hex::encode(&digest[..8])
}

#[derive(Serialize)]
struct TraceFile<'a> {
    video_id: &'a str,
    question_hash: String,
    events: &'a [LoopEvent],
    ledger: &'a Ledger,
}

/// Write `<video_id>.<question_hash>.trace.json` into `dir`.
pub fn write_trace(
    dir: &Path,
    video_id: &str,
    question: &str,
    response: &FinalResponse,
) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let hash = question_hash(question);
    let path = dir.join(format!("{video_id}.{hash}.trace.json"));
    let file = TraceFile {
        video_id,
        question_hash: hash,
        events: &response.trace,
        ledger: &response.ledger,
    };
    fs::write(
        &path,
        serde_json::to_vec_pretty(&file).map_err(std::io::Error::other)?,
    )?;
    Ok(path)
}

pub struct Engine<'a> {
    scope: ScopeConfig,
    options: EngineOptions,
    llm: &'a dyn TextBackend,
    captioner: &'a dyn CaptionBackend,
    cache: Option<MemoryCache>,
}

struct CaptionJob {
    period: TimePeriod,
    level: MemoryLevel,
    instruction: String,
}

impl<'a> Engine<'a> {
    pub fn new(
        scope: ScopeConfig,
        llm: &'a dyn TextBackend,
        captioner: &'a dyn CaptionBackend,
    ) -> Self {
        Self {
            scope,
            options: EngineOptions::default(),
            llm,
            captioner,
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

    pub fn scope(&self) -> &ScopeConfig {
        &self.scope
    }

    pub fn options(&self) -> &EngineOptions {
        &self.options
    }

    fn ms(&self, started: Instant) -> u64 {
        if self.options.record_timing {
            started.elapsed().as_millis() as u64
        } else {
            0
        }
    }

    fn caption_jobs(
        &self,
        video: &VideoMeta,
        jobs: &[CaptionJob],
        state: &mut LoopState,
    ) -> Result<Vec<MemoryEntry>, EngineError> {
        let results = fan_out(jobs, self.options.workers, |job| {
            let req = ClipRequest {
                video: video.clone(),
                period: job.period,
                fps: self.scope.fps_for(job.level),
                instruction: job.instruction.clone(),
            };
            let started = Instant::now();
            let r = self.captioner.caption(&req).and_then(|t| {
                if t.trim().is_empty() {
                    Err(BackendError::EmptyCaption)
                } else {
                    Ok(t)
                }
            });
            (r, self.ms(started))
        });
        let mut entries = Vec::with_capacity(jobs.len());
        let mut first_err = None;
        for (job, (result, wall_ms)) in jobs.iter().zip(results) {
            state.ledger.caption_calls += 1;
            let (response_chars, detail) = match &result {
                Ok(t) => (t.chars().count(), None),
                Err(e) => (0, Some(e.to_string())),
            };
            state.trace.push(LoopEvent {
                kind: EventKind::Caption,
                iteration: state.iteration,
                period: Some(job.period),
                level: Some(job.level),
                prompt_chars: job.instruction.chars().count(),
                response_chars,
                wall_ms,
                attempt: 0,
                detail,
            });
            match result {
                Ok(text) => entries.push(MemoryEntry::new(
                    job.period,
                    job.level,
                    text,
                    job.instruction.clone(),
                )),
                Err(source) if first_err.is_none() => {
                    first_err = Some(EngineError::Caption {
                        period: job.period,
                        source,
                    })
                }
                Err(_) => {}
            }
        }
        match first_err {
            Some(e) => Err(e),
            None => Ok(entries),
        }
    }

    /// One coarse caption per clip of `divide(duration, T_c)`, reusing any
    /// cached coarse entries.
    pub fn build_coarse_memory(
        &self,
        video: &VideoMeta,
        state: &mut LoopState,
    ) -> Result<MemoryList, EngineError> {
        let division = divide(video.duration_s, self.scope.t_coarse_s);
        let mut cm = MemoryList::new();
        if let Some(cache) = &self.cache {
            let loaded = cache.load(&video.video_id)?;
            for e in loaded.memory.level_entries(MemoryLevel::Coarse) {
                if division.index_of(&e.period).is_some() {
                    cm.insert_raw(e.clone());
                }
            }
        }
        let jobs: Vec<CaptionJob> = division
            .periods()
            .iter()
            .filter(|p| cm.get(p, MemoryLevel::Coarse).is_none())
            .map(|p| CaptionJob {
                period: *p,
                level: MemoryLevel::Coarse,
                instruction: COARSE_CAPTION_INSTRUCTION.into(),
            })
            .collect();
        state.ledger.cache_hits += (division.len() - jobs.len()) as u64;
        if jobs.is_empty() {
            return Ok(cm);
        }
        for e in self.caption_jobs(video, &jobs, state)? {
            cm.upsert(e);
        }
        if let Some(cache) = &self.cache {
            cache.store(&video.video_id, &cm)?;
        }
        Ok(cm)
    }

    /// Call the reasoning backend through the repair loop, journaling every
    /// physical call. Terminal repairable failures come back as `Ok(None)`.
    fn consult<T>(
        &self,
        state: &mut LoopState,
        kind: EventKind,
        prompt: &str,
        schema: &str,
        parse: impl Fn(&str) -> Result<T, ProtocolError>,
    ) -> Result<Option<T>, EngineError> {
        state.ledger.reasoning_logical += 1;
        let iteration = state.iteration;
        let mut records: Vec<CallRecord> = Vec::new();
        let result = retry_parse(
            self.llm,
            prompt,
            schema,
            &self.options.decode,
            self.options.max_repairs,
            parse,
            &mut |r| records.push(r),
        );
        for r in records {
            state.ledger.reasoning_calls += 1;
            if r.attempt > 0 {
                state.ledger.repair_calls += 1;
            }
            state.trace.push(LoopEvent {
                kind,
                iteration,
                period: None,
                level: None,
                prompt_chars: r.prompt_chars,
                response_chars: r.response_chars,
                wall_ms: if self.options.record_timing {
                    r.wall_ms
                } else {
                    0
                },
                attempt: r.attempt,
                detail: match r.outcome {
                    CallOutcome::Parsed => None,
                    CallOutcome::Malformed(m) | CallOutcome::BackendFailed(m) => Some(m),
                },
            });
        }
        match result {
            Ok(v) => Ok(Some(v)),
            Err(e) if e.is_repairable() => {
                self.log_error(state, format!("{kind:?} failed after repairs: {e}"));
                Ok(None)
            }
            Err(e) => Err(EngineError::from_protocol(e)),
        }
    }

    fn log_error(&self, state: &mut LoopState, detail: String) {
        log::warn!("{detail}");
        state.trace.push(LoopEvent {
            kind: EventKind::Error,
            iteration: state.iteration,
            period: None,
            level: None,
            prompt_chars: 0,
            response_chars: 0,
            wall_ms: 0,
            attempt: 0,
            detail: Some(detail),
        });
    }

    /// Render with `render`, dropping coarse blocks far from any explored
    /// period (earliest first) until the prompt fits the character budget.
    fn render_within_budget(
        &self,
        cm: &MemoryList,
        explored: &BTreeSet<TimePeriod>,
        coarse: &ClipDivision,
        render: impl Fn(&MemoryList) -> Result<String, ProtocolError>,
    ) -> Result<String, EngineError> {
        let budget = self.options.context_budget_chars;
        let prompt = render(cm).map_err(EngineError::from_protocol)?;
        let chars = prompt.chars().count();
        if chars <= budget {
            return Ok(prompt);
        }
        let mut protected = BTreeSet::new();
        for (i, c) in coarse.periods().iter().enumerate() {
            if explored.iter().any(|e| c.overlap_s(e) > 0) {
                protected.insert(i);
                if i > 0 {
                    protected.insert(i - 1);
                }
                protected.insert(i + 1);
            }
        }
        let evictable: Vec<TimePeriod> = cm
            .level_entries(MemoryLevel::Coarse)
            .filter(|e| {
                coarse
                    .index_of(&e.period)
                    .is_some_and(|i| !protected.contains(&i))
            })
            .map(|e| e.period)
            .collect();
        let mut excess = chars - budget;
        let mut dropped = BTreeSet::new();
        let mut view = cm.clone();
        let mut it = evictable.into_iter();
        loop {
            while excess > 0 {
                let Some(p) = it.next() else { break };
                let block = cm
                    .get(&p, MemoryLevel::Coarse)
                    .map_or(0, |e| e.render().chars().count() + 1);
                excess = excess.saturating_sub(block);
                dropped.insert(p);
            }
            view =
                view.filter(|e| !(e.level == MemoryLevel::Coarse && dropped.contains(&e.period)));
            if view.is_empty() {
                return Err(EngineError::Budget { chars, budget });
            }
            let prompt = render(&view).map_err(EngineError::from_protocol)?;
            let chars = prompt.chars().count();
            if chars <= budget {
                log::debug!(
                    "evicted {} coarse blocks to fit the context budget",
                    dropped.len()
                );
                return Ok(prompt);
            }
            if it.len() == 0 {
                return Err(EngineError::Budget { chars, budget });
            }
            excess = chars - budget;
        }
    }

    /// Localize the most relevant coarse periods, expand by one neighbour on
    /// each side and filter the memory to them. Replaces `state.cm`.
    pub fn sparse_init(
        &self,
        state: &mut LoopState,
        question: &str,
        video: &VideoMeta,
    ) -> Result<RelevantPeriodSet, EngineError> {
        let division = divide(video.duration_s, self.scope.t_coarse_s);
        let count = self.scope.init_relevant_count;
        let prompt = self.render_within_budget(&state.cm, &state.explored, &division, |cm| {
            render_init_localization_prompt(cm, question, count)
        })?;
        let candidates: Vec<TimePeriod> = state
            .cm
            .level_entries(MemoryLevel::Coarse)
            .map(|e| e.period)
            .collect();
        let parsed = self.consult(
            state,
            EventKind::Init,
            &prompt,
            INIT_LOCALIZATION_SCHEMA,
            |raw| parse_init_localization(raw, &candidates, count),
        )?;
        let all: BTreeSet<TimePeriod> = candidates.iter().copied().collect();
        match parsed {
            Some(r) if r.flag => {
                let selected: BTreeSet<TimePeriod> = r.periods.into_iter().collect();
                let expanded = neighborhood_expand(&selected, &division)
                    .map_err(|e| EngineError::Template(e.to_string()))?;
                state.cm = state.cm.filter_by_periods(&expanded);
                Ok(RelevantPeriodSet {
                    periods: expanded,
                    sparse: true,
                })
            }
            _ => Ok(RelevantPeriodSet {
                periods: all,
                sparse: false,
            }),
        }
    }

    /// Unexplored periods the localization agent may pick, in order.
    pub fn eligible_periods(&self, state: &LoopState) -> Vec<(TimePeriod, MemoryLevel)> {
        let mut seen = BTreeSet::new();
        state
            .cm
            .iter()
            .filter(|e| {
                e.level
                    .deeper()
                    .is_some_and(|d| d <= self.options.depth_cap)
            })
            .filter(|e| !state.explored.contains(&e.period))
            .filter(|e| seen.insert(e.period))
            .map(|e| (e.period, e.level))
            .collect()
    }

    /// One depth/breadth exploration step: locate, recaption the period at
    /// its own level and caption its children one level deeper.
    pub fn explore_step(
        &self,
        state: &mut LoopState,
        question: &str,
        video: &VideoMeta,
    ) -> Result<StepOutcome, EngineError> {
        let eligible = self.eligible_periods(state);
        if eligible.is_empty() {
            return Err(EngineError::Exhausted);
        }
        let division = divide(video.duration_s, self.scope.t_coarse_s);
        let prompt = self.render_within_budget(&state.cm, &state.explored, &division, |cm| {
            render_locate_and_instruct_prompt(cm, question, &state.explored, video.duration_s)
        })?;
        let candidates: Vec<TimePeriod> = eligible.iter().map(|(p, _)| *p).collect();
        let located = self.consult(state, EventKind::Locate, &prompt, LOCATE_SCHEMA, |raw| {
            parse_locate_and_instruct(raw, &candidates)
        })?;
        let Some(located) = located else {
            return Ok(StepOutcome::LocateFailed);
        };
        let (period, level) = *eligible
            .iter()
            .find(|(p, _)| *p == located.period)
            .expect("snapped to a candidate");
        if let Some(ev) = state
            .trace
            .iter_mut()
            .rev()
            .find(|e| e.kind == EventKind::Locate)
        {
            ev.period = Some(period);
            ev.level = Some(level);
        }
        let child_level = level.deeper().expect("eligible levels have a deeper level");
        let children = divide_period(period, self.scope.scope_s(child_level));

        let mut jobs = vec![CaptionJob {
            period,
            level,
            instruction: located.instruction.clone(),
        }];
        jobs.extend(children.periods().iter().map(|c| CaptionJob {
            period: *c,
            level: child_level,
            instruction: located.instruction.clone(),
        }));
        let entries = self.caption_jobs(video, &jobs, state)?;
        state.explored.insert(period);
        for e in entries {
            state.cm.upsert(e);
        }
        Ok(StepOutcome::Explored {
            period,
            level,
            children: children.len(),
        })
    }

    fn answer(
        &self,
        state: &mut LoopState,
        question: &str,
        video: &VideoMeta,
        force: bool,
    ) -> Result<Option<AnswerResponse>, EngineError> {
        let division = divide(video.duration_s, self.scope.t_coarse_s);
        let prompt = self.render_within_budget(&state.cm, &state.explored, &division, |cm| {
            render_answer_prompt(cm, question, video.duration_s, force)
        })?;
        let kind = if force {
            EventKind::ForcedAnswer
        } else {
            EventKind::Answer
        };
        self.consult(state, kind, &prompt, ANSWER_SCHEMA, parse_answer)
    }

    pub fn run(&self, video: &VideoMeta, question: &str) -> Result<FinalResponse, EngineError> {
        self.run_observed(video, question, &mut |_| {})
    }

    /// [`Engine::run`], calling `observe` after initialization and after every
    /// exploration step.
    pub fn run_observed(
        &self,
        video: &VideoMeta,
        question: &str,
        observe: &mut dyn FnMut(&LoopState),
    ) -> Result<FinalResponse, EngineError> {
        if question.trim().is_empty() {
            return Err(EngineError::Template("question is empty".into()));
        }
        let mut state = LoopState::default();
        state.cm = self.build_coarse_memory(video, &mut state)?;
        let relevant = self.sparse_init(&mut state, question, video)?;
        observe(&state);

        let mut response = self.answer(&mut state, question, video, false)?;
        while !response.as_ref().is_some_and(|r| r.confidence)
            && state.iteration < self.scope.max_iterations
        {
            state.iteration += 1;
            match self.explore_step(&mut state, question, video) {
                Ok(StepOutcome::Explored { .. }) => {
                    observe(&state);
                    response = self.answer(&mut state, question, video, false)?;
                }
                Ok(StepOutcome::LocateFailed) => observe(&state),
                Err(EngineError::Exhausted) => {
                    state.iteration -= 1;
                    self.log_error(&mut state, EngineError::Exhausted.to_string());
                    break;
                }
                Err(e) => return Err(e),
            }
        }

        let mut forced = false;
        if !response.as_ref().is_some_and(|r| r.confidence) {
            forced = true;
            response = self.answer(&mut state, question, video, true)?;
        }
        let final_answer = response
            .filter(|r| r.confidence)
            .unwrap_or_else(|| AnswerResponse::unconfident("forced answer failed"));
        Ok(FinalResponse {
            confident: final_answer.confidence,
            answer: if final_answer.confidence {
                final_answer.answer
            } else {
                NO_ANSWER.into()
            },
            evidence_periods: final_answer.periods,
            forced,
            reason: final_answer.reason,
            iterations_used: state.iteration,
            relevant_periods: relevant,
            ledger: state.ledger,
            trace: state.trace,
            memory: state.cm,
        })
    }
}
