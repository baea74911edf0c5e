//! Hierarchical temporal memory.
//!
//! Video time is addressed in whole seconds through half-open [`TimePeriod`]s.
//! A video is cut into clips at three nested temporal scopes, and every clip
//! caption lives in a [`MemoryList`] keyed by `(period, level)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MemoryError {
    #[error("invalid time period [{start_s}, {end_s})")]
    InvalidPeriod { start_s: u64, end_s: u64 },
    #[error("period {0} is not a member of the clip division")]
    Membership(TimePeriod),
    #[error("invalid scope configuration: {0}")]
    InvalidScope(String),
}

/// Half-open interval `[start_s, end_s)` of video time in whole seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawPeriod", into = "RawPeriod")]
pub struct TimePeriod {
    start_s: u64,
    end_s: u64,
}

#[derive(Serialize, Deserialize)]
struct RawPeriod {
    start_s: u64,
    end_s: u64,
}

impl TryFrom<RawPeriod> for TimePeriod {
    type Error = MemoryError;
    fn try_from(raw: RawPeriod) -> Result<Self, Self::Error> {
        TimePeriod::new(raw.start_s, raw.end_s)
    }
}

impl From<TimePeriod> for RawPeriod {
    fn from(p: TimePeriod) -> Self {
        RawPeriod {
            start_s: p.start_s,
            end_s: p.end_s,
        }
    }
}

impl TimePeriod {
    pub fn new(start_s: u64, end_s: u64) -> Result<Self, MemoryError> {
        if start_s < end_s {
            Ok(Self { start_s, end_s })
        } else {
            Err(MemoryError::InvalidPeriod { start_s, end_s })
        }
    }

    pub fn start_s(&self) -> u64 {
        self.start_s
    }

    pub fn end_s(&self) -> u64 {
        self.end_s
    }

    pub fn duration_s(&self) -> u64 {
        self.end_s - self.start_s
    }

    pub fn contains_second(&self, second: u64) -> bool {
        self.start_s <= second && second < self.end_s
    }

    pub fn contains(&self, other: &TimePeriod) -> bool {
        self.start_s <= other.start_s && other.end_s <= self.end_s
    }

    /// Length of the intersection in seconds.
    pub fn overlap_s(&self, other: &TimePeriod) -> u64 {
        let lo = self.start_s.max(other.start_s);
        let hi = self.end_s.min(other.end_s);
        hi.saturating_sub(lo)
    }

    /// Shift both endpoints forward.
    pub fn shifted(&self, by_s: u64) -> TimePeriod {
        TimePeriod {
            start_s: self.start_s + by_s,
            end_s: self.end_s + by_s,
        }
    }
}

impl fmt::Display for TimePeriod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} s – {} s]", self.start_s, self.end_s)
    }
}

/// Memory depth. Ordered shallow to deep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemoryLevel {
    Coarse,
    Fine,
    UltraFine,
}

impl MemoryLevel {
    pub const ALL: [MemoryLevel; 3] = [
        MemoryLevel::Coarse,
        MemoryLevel::Fine,
        MemoryLevel::UltraFine,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MemoryLevel::Coarse => "coarse",
            MemoryLevel::Fine => "fine",
            MemoryLevel::UltraFine => "ultra-fine",
        }
    }

    /// The next deeper level, `None` for ultra-fine.
    pub fn deeper(&self) -> Option<MemoryLevel> {
        match self {
            MemoryLevel::Coarse => Some(MemoryLevel::Fine),
            MemoryLevel::Fine => Some(MemoryLevel::UltraFine),
            MemoryLevel::UltraFine => None,
        }
    }

    pub fn parse(s: &str) -> Option<MemoryLevel> {
        match s {
            "coarse" => Some(MemoryLevel::Coarse),
            "fine" => Some(MemoryLevel::Fine),
            "ultra-fine" | "ultrafine" | "ultra_fine" => Some(MemoryLevel::UltraFine),
            _ => None,
        }
    }
}

impl fmt::Display for MemoryLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub video_id: String,
    pub duration_s: u64,
    pub source_uri: String,
}

impl VideoMeta {
    pub fn new(
        video_id: impl Into<String>,
        duration_s: u64,
        source_uri: impl Into<String>,
    ) -> Result<Self, MemoryError> {
        if duration_s == 0 {
            return Err(MemoryError::InvalidPeriod {
                start_s: 0,
                end_s: 0,
            });
        }
        Ok(Self {
            video_id: video_id.into(),
            duration_s,
            source_uri: source_uri.into(),
        })
    }

    pub fn full_period(&self) -> TimePeriod {
        TimePeriod {
            start_s: 0,
            end_s: self.duration_s.max(1),
        }
    }
}

/// Contiguous partition of a span into clips of one scope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipDivision {
    periods: Vec<TimePeriod>,
}

impl ClipDivision {
    pub fn periods(&self) -> &[TimePeriod] {
        &self.periods
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    pub fn index_of(&self, period: &TimePeriod) -> Option<usize> {
        self.periods.binary_search(period).ok()
    }

    /// Clip containing `second`, if any.
    pub fn locate_second(&self, second: u64) -> Option<TimePeriod> {
        let idx = self.periods.partition_point(|p| p.end_s <= second);
        self.periods
            .get(idx)
            .copied()
            .filter(|p| p.contains_second(second))
    }
}

/// Cut `[0, duration_s)` into `ceil(duration_s / scope_s)` clips.
pub fn divide(duration_s: u64, scope_s: u64) -> ClipDivision {
    divide_period(
        TimePeriod {
            start_s: 0,
            end_s: duration_s.max(1),
        },
        scope_s,
    )
}

/// Cut an arbitrary period into consecutive clips of `scope_s` seconds; the
/// last clip takes the remainder.
pub fn divide_period(period: TimePeriod, scope_s: u64) -> ClipDivision {
    let scope_s = scope_s.max(1);
    let count = period.duration_s().div_ceil(scope_s);
    let periods = (0..count)
        .map(|k| {
            let start_s = period.start_s + k * scope_s;
            TimePeriod {
                start_s,
                end_s: (start_s + scope_s).min(period.end_s),
            }
        })
        .collect();
    ClipDivision { periods }
}

/// Add the immediate neighbours of every selected clip.
pub fn neighborhood_expand(
    selected: &BTreeSet<TimePeriod>,
    division: &ClipDivision,
) -> Result<BTreeSet<TimePeriod>, MemoryError> {
    let mut out = BTreeSet::new();
    for period in selected {
        let idx = division
            .index_of(period)
            .ok_or(MemoryError::Membership(*period))?;
        out.insert(*period);
        if idx > 0 {
            out.insert(division.periods[idx - 1]);
        }
        if let Some(next) = division.periods.get(idx + 1) {
            out.insert(*next);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub period: TimePeriod,
    pub level: MemoryLevel,
    pub text: String,
    pub instruction: String,
    #[serde(default)]
    pub revision: u32,
}

impl MemoryEntry {
    pub fn new(
        period: TimePeriod,
        level: MemoryLevel,
        text: impl Into<String>,
        instruction: impl Into<String>,
    ) -> Self {
        Self {
            period,
            level,
            text: text.into(),
            instruction: instruction.into(),
            revision: 0,
        }
    }

    /// One prompt block: `[start s – end s] (level): text`.
    pub fn render(&self) -> String {
        format!("{} ({}): {}", self.period, self.level, self.text)
    }
}

// Sort key: start ascending, then level, then end.
type EntryKey = (u64, MemoryLevel, u64);

fn key_of(period: &TimePeriod, level: MemoryLevel) -> EntryKey {
    (period.start_s, level, period.end_s)
}

/// The current memory list. At most one entry per `(period, level)`;
/// iterates in `(start, level)` order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MemoryList {
    entries: BTreeMap<EntryKey, MemoryEntry>,
}

impl MemoryList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MemoryEntry> {
        self.entries.values()
    }

    pub fn get(&self, period: &TimePeriod, level: MemoryLevel) -> Option<&MemoryEntry> {
        self.entries.get(&key_of(period, level))
    }

    pub fn level_entries(&self, level: MemoryLevel) -> impl Iterator<Item = &MemoryEntry> {
        self.entries.values().filter(move |e| e.level == level)
    }

    /// Insert, or replace text/instruction of an existing `(period, level)`
    /// entry and bump its revision. Returns the stored revision.
    pub fn upsert(&mut self, entry: MemoryEntry) -> u32 {
        let key = key_of(&entry.period, entry.level);
        match self.entries.get_mut(&key) {
            Some(existing) => {
                existing.text = entry.text;
                existing.instruction = entry.instruction;
                existing.revision += 1;
                existing.revision
            }
            None => {
                let rev = entry.revision;
                self.entries.insert(key, entry);
                rev
            }
        }
    }

    /// Value-returning form of [`MemoryList::upsert`].
    pub fn with(mut self, entry: MemoryEntry) -> Self {
        self.upsert(entry);
        self
    }

    /// Insert an entry as-is (revision kept), replacing any existing one.
    pub fn insert_raw(&mut self, entry: MemoryEntry) {
        self.entries
            .insert(key_of(&entry.period, entry.level), entry);
    }

    pub fn filter_by_periods(&self, keep: &BTreeSet<TimePeriod>) -> MemoryList {
        self.filter(|e| keep.contains(&e.period))
    }

    pub fn filter(&self, mut pred: impl FnMut(&MemoryEntry) -> bool) -> MemoryList {
        MemoryList {
            entries: self
                .entries
                .iter()
                .filter(|(_, e)| pred(e))
                .map(|(k, e)| (*k, e.clone()))
                .collect(),
        }
    }

    pub fn render_for_prompt(&self) -> String {
        let blocks: Vec<String> = self.entries.values().map(MemoryEntry::render).collect();
        blocks.join("\n")
    }
}

impl FromIterator<MemoryEntry> for MemoryList {
    fn from_iter<I: IntoIterator<Item = MemoryEntry>>(iter: I) -> Self {
        let mut list = MemoryList::new();
        for e in iter {
            list.upsert(e);
        }
        list
    }
}

impl Serialize for MemoryList {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.entries.values())
    }
}

impl<'de> Deserialize<'de> for MemoryList {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let entries = Vec::<MemoryEntry>::deserialize(d)?;
        let mut list = MemoryList::new();
        for e in entries {
            list.insert_raw(e);
        }
        Ok(list)
    }
}

impl<'a> IntoIterator for &'a MemoryList {
    type Item = &'a MemoryEntry;
    type IntoIter = std::collections::btree_map::Values<'a, EntryKey, MemoryEntry>;
    fn into_iter(self) -> Self::IntoIter {
        self.entries.values()
    }
}
