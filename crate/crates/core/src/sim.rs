//! Synthetic annotated worlds and deterministic scripted agents, so the whole
//! loop can run end to end without models or media.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ScopeConfig;
use crate::eval::{AnswerOption, Needle, QARecord};
use crate::memory::{MemoryLevel, TimePeriod, VideoMeta};
use crate::protocol::{
    AnswerResponse, BackendError, CaptionBackend, ClipRequest, DecodeParams,
    InitLocalizationResponse, LocateAndInstructResponse, TextBackend, ANSWER_SENTINEL,
    FORCED_SENTINEL, INIT_LOCALIZATION_SENTINEL, LOCATE_SENTINEL, RELEVANCE_SENTINEL,
};

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("invalid world {video_id}: {reason}")]
    Invalid { video_id: String, reason: String },
    #[error("cannot read or write world file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed world file: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldEvent {
    pub period: TimePeriod,
    pub summary: String,
    pub detail: String,
    /// Per-second annotations, keyed by absolute second.
    #[serde(default)]
    pub micro: BTreeMap<u64, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub video_id: String,
    pub duration_s: u64,
    pub events: Vec<WorldEvent>,
}

pub const NOTHING_NOTABLE: &str = "nothing notable";

impl WorldSpec {
    pub fn validate(&self) -> Result<(), WorldError> {
        let invalid = |reason: String| WorldError::Invalid {
            video_id: self.video_id.clone(),
            reason,
        };
        if self.duration_s == 0 {
            return Err(invalid("duration is zero".into()));
        }
        for e in &self.events {
            if e.period.end_s() > self.duration_s {
                return Err(invalid(format!(
                    "event {} ends after {} s",
                    e.period, self.duration_s
                )));
            }
            if let Some(s) = e.micro.keys().find(|s| !e.period.contains_second(**s)) {
                return Err(invalid(format!(
                    "micro second {s} outside event {}",
                    e.period
                )));
            }
        }
        Ok(())
    }

    pub fn meta(&self) -> VideoMeta {
        VideoMeta {
            video_id: self.video_id.clone(),
            duration_s: self.duration_s,
            source_uri: format!("sim://{}", self.video_id),
        }
    }

    pub fn load(path: &Path) -> Result<Self, WorldError> {
        let world: WorldSpec = serde_json::from_slice(&fs::read(path)?)?;
        world.validate()?;
        Ok(world)
    }

    pub fn save(&self, path: &Path) -> Result<(), WorldError> {
        fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    /// Events overlapping `period`, in chronological order.
    pub fn overlapping(&self, period: &TimePeriod) -> Vec<&WorldEvent> {
        let mut hits: Vec<&WorldEvent> = self
            .events
            .iter()
            .filter(|e| e.period.overlap_s(period) > 0)
            .collect();
        hits.sort_by_key(|e| (e.period.start_s(), e.period.end_s()));
        hits
    }

    /// What the scripted captioner sees at the granularity implied by the
    /// clip length.
    pub fn describe(&self, period: &TimePeriod, scope: &ScopeConfig) -> String {
        let events = self.overlapping(period);
        let d = period.duration_s();
        let mut parts: Vec<&str> = if d > scope.t_fine_s {
            events.iter().map(|e| e.summary.as_str()).collect()
        } else if d > scope.t_ultrafine_s {
            events.iter().map(|e| e.detail.as_str()).collect()
        } else {
            events
                .iter()
                .flat_map(|e| {
                    e.micro
                        .range(period.start_s()..period.end_s())
                        .map(|(_, m)| m.as_str())
                })
                .collect()
        };
        parts.dedup();
        if parts.is_empty() {
            NOTHING_NOTABLE.to_owned()
        } else {
            parts.join(" ")
        }
    }
}

/// Captions clips by reading the world's annotations; ignores instructions.
#[derive(Debug, Clone)]
pub struct ScriptedCaptioner {
    pub world: WorldSpec,
    pub scope: ScopeConfig,
}

impl ScriptedCaptioner {
    pub fn new(world: WorldSpec, scope: ScopeConfig) -> Self {
        Self { world, scope }
    }
}

impl CaptionBackend for ScriptedCaptioner {
    fn caption(&self, request: &ClipRequest) -> Result<String, BackendError> {
        Ok(self.world.describe(&request.period, &self.scope))
    }
}

const STOPWORDS: &[&str] = &[
    "about", "after", "an", "and", "are", "as", "at", "be", "before", "by", "did", "do", "does",
    "during", "for", "from", "has", "have", "how", "in", "into", "is", "it", "its", "of", "on",
    "or", "that", "the", "their", "them", "then", "there", "they", "this", "to", "video", "was",
    "what", "when", "where", "which", "while", "who", "why", "with",
];

/// Lowercase alphanumeric tokens of two or more characters, minus stopwords.
pub fn keywords(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() > 1)
        .map(str::to_lowercase)
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBlock {
    pub period: TimePeriod,
    pub level: MemoryLevel,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptOption {
    pub label: String,
    pub text: String,
}

static BLOCK_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?m)^\[(\d+) s – (\d+) s\] \(([a-z-]+)\): (.*)$").expect("static regex")
});
static OPTION_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*\(?([A-Z])[.)]\s+(.+?)\s*$").expect("static regex"));
static TUPLE_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\((\d+), (\d+)\)").expect("static regex"));

/// Memory blocks as rendered into a prompt.
pub fn parse_blocks(prompt: &str) -> Vec<PromptBlock> {
    BLOCK_RE
        .captures_iter(prompt)
        .filter_map(|c| {
            let period = TimePeriod::new(c[1].parse().ok()?, c[2].parse().ok()?).ok()?;
            let level = MemoryLevel::parse(&c[3])?;
            Some(PromptBlock {
                period,
                level,
                text: c[4].to_owned(),
            })
        })
        .collect()
}

/// The question text embedded in a rendered template.
pub fn parse_question(prompt: &str) -> Option<String> {
    let mut lines = prompt
        .lines()
        .skip_while(|l| !l.starts_with("Now, a question has been raised regarding"));
    lines.next()?;
    let body: Vec<&str> = lines
        .take_while(|l| !l.starts_with("Please read the given"))
        .collect();
    let q = body.join("\n").trim().to_owned();
    (!q.is_empty()).then_some(q)
}

pub fn parse_options(question: &str) -> Vec<PromptOption> {
    question
        .lines()
        .filter_map(|l| OPTION_RE.captures(l))
        .map(|c| PromptOption {
            label: c[1].to_owned(),
            text: c[2].to_owned(),
        })
        .collect()
}

fn parse_explored(prompt: &str) -> BTreeSet<TimePeriod> {
    let Some(start) = prompt.find("other than the following time periods:") else {
        return BTreeSet::new();
    };
    let rest = &prompt[start..];
    let end = rest.find("In addition, assume").unwrap_or(rest.len());
    TUPLE_RE
        .captures_iter(&rest[..end])
        .filter_map(|c| TimePeriod::new(c[1].parse().ok()?, c[2].parse().ok()?).ok())
        .collect()
}

fn count_word(prompt: &str) -> usize {
    const WORDS: [&str; 10] = [
        "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    ];
    let marker = "further observing the video content of ";
    prompt
        .find(marker)
        .and_then(|i| prompt[i + marker.len()..].split_whitespace().next())
        .and_then(|w| {
            WORDS
                .iter()
                .position(|x| *x == w)
                .map(|i| i + 1)
                .or_else(|| w.parse().ok())
        })
        .unwrap_or(3)
}

/// Deterministic keyword-matching stand-in for every reasoning role.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedReasoner;

impl ScriptedReasoner {
    fn overlap(question: &BTreeSet<String>, text: &str) -> usize {
        keywords(text).intersection(question).count()
    }

    fn init(&self, prompt: &str, question: &str) -> String {
        let q = keywords(question);
        let mut scored: Vec<(usize, PromptBlock)> = parse_blocks(prompt)
            .into_iter()
            .map(|b| (Self::overlap(&q, &b.text), b))
            .filter(|(s, _)| *s > 0)
            .collect();
        scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.period.cmp(&b.1.period)));
        scored.truncate(count_word(prompt));
        let response = if scored.is_empty() {
            InitLocalizationResponse {
                flag: false,
                periods: Vec::new(),
                reason: "no period mentions the question".into(),
            }
        } else {
            InitLocalizationResponse {
                flag: true,
                periods: scored.iter().map(|(_, b)| b.period).collect(),
                reason: "these periods share the most keywords with the question".into(),
            }
        };
        response.to_dict_text()
    }

    fn locate(&self, prompt: &str, question: &str) -> String {
        let q = keywords(question);
        let explored = parse_explored(prompt);
        let best = parse_blocks(prompt)
            .into_iter()
            .filter(|b| b.level != MemoryLevel::UltraFine && !explored.contains(&b.period))
            .map(|b| (Self::overlap(&q, &b.text), b))
            .fold(None::<(usize, PromptBlock)>, |acc, cur| match acc {
                Some(a) if a.0 > cur.0 || (a.0 == cur.0 && a.1.period <= cur.1.period) => Some(a),
                _ => Some(cur),
            });
        // Nothing eligible: name an explored period anyway so the parser
        // reports the failure the way a confused model would.
        let period = best
            .map(|(_, b)| b.period)
            .or_else(|| explored.first().copied());
        let focus: Vec<String> = q.into_iter().collect();
        LocateAndInstructResponse {
            period: period.unwrap_or(TimePeriod::new(0, 1).expect("valid")),
            instruction: format!(
                "Please observe all the details in this video very carefully and provide a detailed and objective description of what is shown in the video. You should focus particularly on: {}.",
                focus.join(", ")
            ),
            reason: "largest keyword overlap with the question".into(),
        }
        .to_dict_text()
    }

    fn answer(&self, prompt: &str, question: &str, force: bool) -> String {
        let blocks = parse_blocks(prompt);
        let options = parse_options(question);
        let label = |o: &PromptOption| format!("{}. {}", o.label, o.text);
        for b in &blocks {
            let text = b.text.to_lowercase();
            if let Some(o) = options
                .iter()
                .find(|o| text.contains(&o.text.to_lowercase()))
            {
                return AnswerResponse {
                    confidence: true,
                    answer: label(o),
                    periods: vec![b.period],
                    reason: format!("the description of {} states it", b.period),
                }
                .to_dict_text();
            }
        }
        if !force {
            return AnswerResponse::unconfident("no description states the answer").to_dict_text();
        }
        let q = keywords(question);
        let best = blocks.iter().fold(None::<(usize, &PromptBlock)>, |acc, b| {
            let s = Self::overlap(&q, &b.text);
            match acc {
                Some(a) if a.0 >= s => Some(a),
                _ => Some((s, b)),
            }
        });
        let Some((_, block)) = best else {
            return AnswerResponse::unconfident("no descriptions").to_dict_text();
        };
        let answer = options
            .iter()
            .fold(None::<(usize, &PromptOption)>, |acc, o| {
                let s = keywords(&o.text)
                    .intersection(&keywords(&block.text))
                    .count();
                match acc {
                    Some(a) if a.0 >= s => Some(a),
                    _ => Some((s, o)),
                }
            })
            .map_or_else(|| block.text.clone(), |(_, o)| label(o));
        AnswerResponse {
            confidence: true,
            answer,
            periods: vec![block.period],
            reason: "best guess from the closest description".into(),
        }
        .to_dict_text()
    }

    fn relevance(&self, prompt: &str) -> String {
        let text = prompt
            .split_once("Given Text: ")
            .and_then(|(_, rest)| rest.split_once("\nGiven Question: "))
            .map(|(t, q)| (t.to_owned(), q.trim().to_owned()));
        let score = text.map_or(1, |(t, q)| 1 + Self::overlap(&keywords(&q), &t).min(4));
        format!("Scoring result: {score} points")
    }
}

impl TextBackend for ScriptedReasoner {
    fn complete(&self, prompt: &str, _: &DecodeParams) -> Result<String, BackendError> {
        if prompt.contains(RELEVANCE_SENTINEL) {
            return Ok(self.relevance(prompt));
        }
        let question = parse_question(prompt)
            .ok_or_else(|| BackendError::UnknownTemplate("no question section".into()))?;
        if prompt.contains(FORCED_SENTINEL) {
            Ok(self.answer(prompt, &question, true))
        } else if prompt.contains(ANSWER_SENTINEL) {
            Ok(self.answer(prompt, &question, false))
        } else if prompt.contains(LOCATE_SENTINEL) {
            Ok(self.locate(prompt, &question))
        } else if prompt.contains(INIT_LOCALIZATION_SENTINEL) {
            Ok(self.init(prompt, &question))
        } else {
            Err(BackendError::UnknownTemplate(
                prompt.chars().take(80).collect(),
            ))
        }
    }
}

const COLORS: &[&str] = &[
    "red", "blue", "green", "yellow", "purple", "orange", "black", "white",
];
const ITEMS: &[&str] = &[
    "umbrella",
    "lantern",
    "kettle",
    "bicycle",
    "helmet",
    "scarf",
    "backpack",
    "camera",
    "guitar",
    "suitcase",
    "ladder",
    "bucket",
    "notebook",
    "teapot",
    "compass",
    "trumpet",
    "basket",
    "hammer",
    "mirror",
    "telescope",
    "violin",
    "candle",
    "globe",
    "clock",
    "kite",
    "drum",
    "vase",
    "whistle",
    "anchor",
    "feather",
    "envelope",
    "shovel",
    "balloon",
    "wrench",
    "bottle",
    "jacket",
    "pillow",
    "saucepan",
    "ribbon",
    "flashlight",
    "microphone",
    "paintbrush",
    "skateboard",
    "thermos",
    "toolbox",
    "trophy",
    "wallet",
    "wheelbarrow",
];
const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const LABELS: &[&str] = &["A", "B", "C", "D"];

/// Seeded source of unique pseudo-words and item nouns. Everything drawn
/// from one lexicon is pairwise distinct.
pub struct Lexicon {
    rng: ChaCha8Rng,
    used: HashSet<String>,
    items: Vec<&'static str>,
}

impl Lexicon {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut items = ITEMS.to_vec();
        items.shuffle(&mut rng);
        let used = COLORS
            .iter()
            .chain(ITEMS)
            .chain(STOPWORDS)
            .map(|s| s.to_string())
            .collect();
        Self { rng, used, items }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn word(&mut self) -> String {
        loop {
            let syllables = self.rng.random_range(3..=4);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push(*CONSONANTS.choose(&mut self.rng).expect("non-empty") as char);
                w.push(*VOWELS.choose(&mut self.rng).expect("non-empty") as char);
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    pub fn words(&mut self, n: usize) -> Vec<String> {
        (0..n).map(|_| self.word()).collect()
    }

    /// A fresh item noun; panics once the list is used up.
    pub fn item(&mut self) -> &'static str {
        self.items.pop().expect("item nouns exhausted")
    }
}

/// Keywords of one planted scene.
struct Scene {
    actor: String,
    verb: String,
    place: String,
}

impl Scene {
    fn new(lex: &mut Lexicon) -> Self {
        Scene {
            actor: lex.word(),
            verb: lex.word(),
            place: lex.word(),
        }
    }

    fn lead(&self) -> String {
        format!("the {} {} by the {}", self.actor, self.verb, self.place)
    }

    fn summary(&self, lex: &mut Lexicon) -> String {
        format!("{} {}", self.lead(), lex.words(2).join(" "))
    }

    fn detail(&self, items: &[&str], lex: &mut Lexicon) -> String {
        let noise = lex.words(36).join(" ");
        if items.is_empty() {
            return format!("{} {noise}", self.lead());
        }
        let held: Vec<String> = items.iter().map(|i| format!("a {i}")).collect();
        format!("{} holding {} {noise}", self.lead(), held.join(" and "))
    }

    fn micro(&self, color: &str, item: &str, lex: &mut Lexicon) -> String {
        format!(
            "{} and lifts a {color} {item} {}",
            self.lead(),
            lex.words(72).join(" ")
        )
    }

    fn qa(
        &self,
        id: String,
        video_id: &str,
        item: &str,
        color: &str,
        second: u64,
        lex: &mut Lexicon,
    ) -> QARecord {
        let mut colors: Vec<&str> = COLORS.iter().copied().filter(|c| *c != color).collect();
        colors.shuffle(lex.rng());
        colors.truncate(LABELS.len() - 1);
        colors.push(color);
        colors.shuffle(lex.rng());
        let options: Vec<AnswerOption> = LABELS
            .iter()
            .zip(&colors)
            .map(|(l, c)| AnswerOption {
                label: l.to_string(),
                text: format!("{c} {item}"),
            })
            .collect();
        let answer_label = options[colors.iter().position(|c| *c == color).expect("planted")]
            .label
            .clone();
        QARecord {
            id,
            video_id: video_id.to_owned(),
            question: format!(
                "What color is the {item} the {} lifts while they {} by the {}?",
                self.actor, self.verb, self.place
            ),
            options,
            answer_label,
            category: Some("Detail Perception".into()),
            evidence_s: Some(second),
        }
    }
}

fn filler(period: TimePeriod, lex: &mut Lexicon) -> WorldEvent {
    WorldEvent {
        period,
        summary: lex.words(5).join(" "),
        detail: lex.words(10).join(" "),
        micro: BTreeMap::new(),
    }
}

/// A generated world with the questions about its planted facts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedWorld {
    pub world: WorldSpec,
    pub qas: Vec<QARecord>,
}

/// Tile `[from, to)` with filler events of 60-400 s.
fn tile(from: u64, to: u64, lex: &mut Lexicon, out: &mut Vec<WorldEvent>) {
    let mut t = from;
    while t < to {
        let len = lex.rng().random_range(60..=400u64).min(to - t);
        out.push(filler(TimePeriod::new(t, t + len).expect("non-empty"), lex));
        t += len;
    }
}

/// A world of `duration_s` seconds with `facts` planted ultra-fine facts.
/// Each fact fills one aligned fine slot in a distinct coarse clip and is
/// only answerable from the ultra-fine caption of its planted second.
pub fn generate_world(
    lex: &mut Lexicon,
    video_id: &str,
    duration_s: u64,
    scope: &ScopeConfig,
    facts: usize,
) -> Result<PlantedWorld, WorldError> {
    let invalid = |reason: String| WorldError::Invalid {
        video_id: video_id.to_owned(),
        reason,
    };
    let (tc, tf) = (scope.t_coarse_s, scope.t_fine_s);
    if tc % tf != 0 {
        return Err(invalid(format!(
            "coarse scope {tc} s is not a multiple of fine scope {tf} s"
        )));
    }
    let full_coarse: Vec<u64> = (0..duration_s / tc).collect();
    if full_coarse.len() < facts {
        return Err(invalid(format!(
            "{duration_s} s holds fewer than {facts} full coarse clips"
        )));
    }
    let mut chosen: Vec<u64> = full_coarse
        .choose_multiple(lex.rng(), facts)
        .copied()
        .collect();
    chosen.sort_unstable();
    let slots: Vec<u64> = chosen
        .iter()
        .map(|c| c * tc + lex.rng().random_range(0..tc / tf) * tf)
        .collect();

    let mut events = Vec::new();
    let mut qas = Vec::new();
    let mut cursor = 0;
    for (i, &start) in slots.iter().enumerate() {
        tile(cursor, start, lex, &mut events);
        let period = TimePeriod::new(start, start + tf).expect("non-empty");
        let scene = Scene::new(lex);
        let item = lex.item();
        let color = *COLORS.choose(lex.rng()).expect("non-empty");
        let second = start + lex.rng().random_range(0..tf);
        let micro = BTreeMap::from([(second, scene.micro(color, item, lex))]);
        events.push(WorldEvent {
            period,
            summary: scene.summary(lex),
            detail: scene.detail(&[item], lex),
            micro,
        });
        qas.push(scene.qa(
            format!("{video_id}-q{i}"),
            video_id,
            item,
            color,
            second,
            lex,
        ));
        cursor = start + tf;
    }
    tile(cursor, duration_s, lex, &mut events);
    let world = WorldSpec {
        video_id: video_id.to_owned(),
        duration_s,
        events,
    };
    world.validate()?;
    Ok(PlantedWorld { world, qas })
}

/// A world made only of filler events.
pub fn generate_base(lex: &mut Lexicon, video_id: &str, duration_s: u64) -> WorldSpec {
    let mut events = Vec::new();
    tile(0, duration_s, lex, &mut events);
    WorldSpec {
        video_id: video_id.to_owned(),
        duration_s,
        events,
    }
}

/// A short clip holding one scene with `questions` planted details, one per
/// distinct second. Each detail is visible in a window of a few seconds
/// around its second; the rest of the clip shows the bare scene.
pub fn generate_needle(
    lex: &mut Lexicon,
    video_id: &str,
    duration_s: u64,
    questions: usize,
) -> Needle {
    let scene = Scene::new(lex);
    let summary = scene.summary(lex);
    let items: Vec<&str> = (0..questions).map(|_| lex.item()).collect();
    let mut seconds: Vec<u64> = (0..duration_s)
        .collect::<Vec<_>>()
        .choose_multiple(lex.rng(), questions)
        .copied()
        .collect();
    seconds.sort_unstable();
    let splits: Vec<u64> = seconds.windows(2).map(|w| (w[0] + w[1]) / 2 + 1).collect();

    let mut events = Vec::new();
    let mut qas = Vec::new();
    let mut cursor = 0;
    for (i, (item, &second)) in items.iter().zip(&seconds).enumerate() {
        let lo = second.saturating_sub(3).max(cursor);
        let hi = (second + 4)
            .min(splits.get(i).copied().unwrap_or(duration_s))
            .min(duration_s);
        if cursor < lo {
            events.push(bare_scene(&scene, &summary, cursor, lo, lex));
        }
        let color = *COLORS.choose(lex.rng()).expect("non-empty");
        events.push(WorldEvent {
            period: TimePeriod::new(lo, hi).expect("window holds its second"),
            summary: format!("{summary} beside a {item}"),
            detail: scene.detail(&[item], lex),
            micro: BTreeMap::from([(second, scene.micro(color, item, lex))]),
        });
        qas.push(scene.qa(
            format!("{video_id}-q{i}"),
            video_id,
            item,
            color,
            second,
            lex,
        ));
        cursor = hi;
    }
    if cursor < duration_s {
        events.push(bare_scene(&scene, &summary, cursor, duration_s, lex));
    }
    Needle {
        world: WorldSpec {
            video_id: video_id.to_owned(),
            duration_s,
            events,
        },
        qas,
    }
}

fn bare_scene(scene: &Scene, summary: &str, from: u64, to: u64, lex: &mut Lexicon) -> WorldEvent {
    WorldEvent {
        period: TimePeriod::new(from, to).expect("non-empty"),
        summary: summary.to_owned(),
        detail: scene.detail(&[], lex),
        micro: BTreeMap::new(),
    }
}
