use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::memory::{MemoryLevel, MemoryList, TimePeriod};
use crate::protocol::{
    render_relevance_prompt, retry_parse, DecodeParams, ParseError, ProtocolError, TextBackend,
};

/// Shannon entropy in bits over lowercase whitespace tokens. Counts are
/// accumulated in first-occurrence order.
pub fn shannon_entropy(text: &str) -> f64 {
    let lowered = text.to_lowercase();
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut total = 0usize;
    for w in lowered.split_whitespace() {
        total += 1;
        match index.get(w) {
            Some(&i) => counts[i] += 1,
            None => {
                index.insert(w, counts.len());
                counts.push(1);
            }
        }
    }
    let mut entropy = 0.0;
    for c in counts {
        let p = c as f64 / total as f64;
        entropy -= p * p.log2();
    }
    entropy
}

static SCORE_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"Scoring result:\s*(-?\d+)\s*points?").expect("static regex"));

pub const RELEVANCE_SCHEMA: &str = "Scoring result: X points";

pub fn parse_relevance(raw: &str) -> Result<u8, ProtocolError> {
    let caps = SCORE_RE.captures(raw).ok_or(ParseError::NoScore)?;
    let x: i64 = caps[1].parse().map_err(|_| ParseError::NoScore)?;
    if (1..=5).contains(&x) {
        Ok(x as u8)
    } else {
        Err(ParseError::ScoreRange(x).into())
    }
}

/// Ask the evaluator model how relevant `text` is to `question`, 1-5.
pub fn relevance_score(
    text: &str,
    question: &str,
    llm: &dyn TextBackend,
    max_repairs: usize,
) -> Result<u8, ProtocolError> {
    let prompt = render_relevance_prompt(text, question);
    retry_parse(
        llm,
        &prompt,
        RELEVANCE_SCHEMA,
        &DecodeParams::default(),
        max_repairs,
        parse_relevance,
        &mut |_| {},
    )
}

/// Texts of one memory level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSnapshot {
    pub level: MemoryLevel,
    pub texts: Vec<String>,
}

/// Entries of each level overlapping any of `periods`, i.e. the path the loop
/// descended along to reach its evidence.
pub fn snapshot_along(memory: &MemoryList, periods: &[TimePeriod]) -> Vec<LevelSnapshot> {
    MemoryLevel::ALL
        .iter()
        .map(|&level| LevelSnapshot {
            level,
            texts: memory
                .level_entries(level)
                .filter(|e| periods.iter().any(|p| p.overlap_s(&e.period) > 0))
                .map(|e| e.text.clone())
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub level: MemoryLevel,
    pub entries: usize,
    pub entropy_mean: Option<f64>,
    pub relevance_mean: Option<f64>,
}

impl LevelRow {
    /// A level with no entries; its means are undefined.
    pub fn is_empty(&self) -> bool {
        self.entries == 0
    }
}

/// Per-level unweighted means of entropy and evaluator relevance.
pub fn richness_relevance_curve(
    snapshots: &[LevelSnapshot],
    question: &str,
    llm: &dyn TextBackend,
    max_repairs: usize,
) -> Result<Vec<LevelRow>, ProtocolError> {
    let mut rows = Vec::with_capacity(snapshots.len());
    for s in snapshots {
        if s.texts.is_empty() {
            log::warn!("level {} has no entries", s.level);
            rows.push(LevelRow {
                level: s.level,
                entries: 0,
                entropy_mean: None,
                relevance_mean: None,
            });
            continue;
        }
        let n = s.texts.len() as f64;
        let entropy = s.texts.iter().map(|t| shannon_entropy(t)).sum::<f64>() / n;
        let mut relevance = 0.0;
        for t in &s.texts {
            relevance += f64::from(relevance_score(t, question, llm, max_repairs)?);
        }
        rows.push(LevelRow {
            level: s.level,
            entries: s.texts.len(),
            entropy_mean: Some(entropy),
            relevance_mean: Some(relevance / n),
        });
    }
    Ok(rows)
}

/// `level,entropy_mean,relevance_mean`; undefined means are left blank.
pub fn curve_csv(rows: &[LevelRow]) -> String {
    let mut out = String::from("level,entropy_mean,relevance_mean\n");
    let cell = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6}"));
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{}",
            r.level,
            cell(r.entropy_mean),
            cell(r.relevance_mean)
        );
    }
    out
}
