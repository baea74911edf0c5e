use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::QARecord;
use crate::memory::TimePeriod;
use crate::sim::{WorldEvent, WorldSpec};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NeedleError {
    #[error("two needles are inserted at {position} s")]
    Overlap { position: u64 },
    #[error("insertion point {position} s is beyond the {duration_s} s base")]
    OutOfBounds { position: u64, duration_s: u64 },
    #[error("{needles} needles but {positions} positions")]
    Count { needles: usize, positions: usize },
    #[error("needle {index} is empty")]
    EmptyNeedle { index: usize },
}

/// A short clip with questions whose `evidence_s` is relative to the clip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Needle {
    pub world: WorldSpec,
    pub qas: Vec<QARecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Haystack {
    pub world: WorldSpec,
    pub qas: Vec<QARecord>,
    /// Where each needle landed, in input order.
    pub needle_periods: Vec<TimePeriod>,
}

/// Insertion offsets: for each input needle, its start in the output.
struct Layout {
    /// (position in base, duration) sorted by position.
    inserts: Vec<(u64, u64)>,
    starts: Vec<u64>,
}

impl Layout {
    fn new(base_duration: u64, durations: &[u64], positions: &[u64]) -> Result<Self, NeedleError> {
        if durations.len() != positions.len() {
            return Err(NeedleError::Count {
                needles: durations.len(),
                positions: positions.len(),
            });
        }
        if let Some(index) = durations.iter().position(|d| *d == 0) {
            return Err(NeedleError::EmptyNeedle { index });
        }
        if let Some(&position) = positions.iter().find(|p| **p > base_duration) {
            return Err(NeedleError::OutOfBounds {
                position,
                duration_s: base_duration,
            });
        }
        let mut order: Vec<usize> = (0..positions.len()).collect();
        order.sort_by_key(|&i| positions[i]);
        if let Some(w) = order
            .windows(2)
            .find(|w| positions[w[0]] == positions[w[1]])
        {
            return Err(NeedleError::Overlap {
                position: positions[w[0]],
            });
        }
        let mut starts = vec![0; positions.len()];
        let mut inserted = 0;
        for &i in &order {
            starts[i] = positions[i] + inserted;
            inserted += durations[i];
        }
        let inserts = order
            .iter()
            .map(|&i| (positions[i], durations[i]))
            .collect();
        Ok(Layout { inserts, starts })
    }

    /// New coordinate of base second `s`; needles inserted at `s` come first.
    fn shift(&self, s: u64) -> u64 {
        s + self
            .inserts
            .iter()
            .filter(|(p, _)| *p <= s)
            .map(|(_, d)| d)
            .sum::<u64>()
    }

    fn total(&self, base_duration: u64) -> u64 {
        base_duration + self.inserts.iter().map(|(_, d)| d).sum::<u64>()
    }
}

fn shifted_qa(qa: &QARecord, video_id: &str, f: impl Fn(u64) -> u64) -> QARecord {
    QARecord {
        video_id: video_id.to_owned(),
        evidence_s: qa.evidence_s.map(f),
        ..qa.clone()
    }
}

/// Splice `needles` into `base` at the given base-timeline positions. Events
/// the insertion falls inside are split around it; later content shifts by
/// the inserted duration. QA timestamps move to the new timeline.
pub fn build_needle_haystack(
    base: &WorldSpec,
    base_qas: &[QARecord],
    needles: &[Needle],
    positions: &[u64],
) -> Result<Haystack, NeedleError> {
    let durations: Vec<u64> = needles.iter().map(|n| n.world.duration_s).collect();
    let layout = Layout::new(base.duration_s, &durations, positions)?;
    if needles.is_empty() {
        return Ok(Haystack {
            world: base.clone(),
            qas: base_qas.to_vec(),
            needle_periods: Vec::new(),
        });
    }
    let video_id = format!("{}-haystack", base.video_id);

    let mut events = Vec::new();
    for e in &base.events {
        let mut cuts: Vec<u64> = vec![e.period.start_s()];
        cuts.extend(
            layout
                .inserts
                .iter()
                .map(|(p, _)| *p)
                .filter(|p| e.period.start_s() < *p && *p < e.period.end_s()),
        );
        cuts.push(e.period.end_s());
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let shift = layout.shift(a) - a;
            let micro: BTreeMap<u64, String> = e
                .micro
                .range(a..b)
                .map(|(s, m)| (s + shift, m.clone()))
                .collect();
            events.push(WorldEvent {
                period: TimePeriod::new(a + shift, b + shift).expect("non-empty piece"),
                micro,
                ..e.clone()
            });
        }
    }
    let mut needle_periods = Vec::with_capacity(needles.len());
    let mut qas: Vec<QARecord> = base_qas
        .iter()
        .map(|q| shifted_qa(q, &video_id, |s| layout.shift(s)))
        .collect();
    for (i, n) in needles.iter().enumerate() {
        let start = layout.starts[i];
        needle_periods
            .push(TimePeriod::new(start, start + n.world.duration_s).expect("non-empty needle"));
        for e in &n.world.events {
            events.push(WorldEvent {
                period: e.period.shifted(start),
                micro: e
                    .micro
                    .iter()
                    .map(|(s, m)| (s + start, m.clone()))
                    .collect(),
                ..e.clone()
            });
        }
        qas.extend(
            n.qas
                .iter()
                .map(|q| shifted_qa(q, &video_id, |s| s + start)),
        );
    }
    events.sort_by_key(|e| (e.period.start_s(), e.period.end_s()));
    let world = WorldSpec {
        video_id,
        duration_s: layout.total(base.duration_s),
        events,
    };
    Ok(Haystack {
        world,
        qas,
        needle_periods,
    })
}

/// A media needle: a clip file and its questions in clip-relative seconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediaNeedle {
    pub source: String,
    pub duration_s: u64,
    pub qas: Vec<QARecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpliceSegment {
    pub source: String,
    pub start_s: u64,
    pub end_s: u64,
}

/// Cut list for the external decoder, plus the rewritten questions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplicePlan {
    pub video_id: String,
    pub duration_s: u64,
    pub segments: Vec<SpliceSegment>,
    pub needle_periods: Vec<TimePeriod>,
    pub qas: Vec<QARecord>,
}

impl SplicePlan {
    /// The plan in ffmpeg concat-demuxer syntax.
    pub fn concat_script(&self) -> String {
        let mut out = String::from("ffconcat version 1.0\n");
        for s in &self.segments {
            let _ = writeln!(
                out,
                "file '{}'\ninpoint {}\noutpoint {}",
                s.source.replace('\'', r"'\''"),
                s.start_s,
                s.end_s
            );
        }
        out
    }
}

pub fn plan_media_splice(
    base_video_id: &str,
    base_source: &str,
    base_duration_s: u64,
    base_qas: &[QARecord],
    needles: &[MediaNeedle],
    positions: &[u64],
) -> Result<SplicePlan, NeedleError> {
    let durations: Vec<u64> = needles.iter().map(|n| n.duration_s).collect();
    let layout = Layout::new(base_duration_s, &durations, positions)?;
    let video_id = format!("{base_video_id}-haystack");
    let mut order: Vec<usize> = (0..needles.len()).collect();
    order.sort_by_key(|&i| positions[i]);

    let mut segments = Vec::new();
    let mut cursor = 0;
    for &i in &order {
        if positions[i] > cursor {
            segments.push(SpliceSegment {
                source: base_source.to_owned(),
                start_s: cursor,
                end_s: positions[i],
            });
        }
        segments.push(SpliceSegment {
            source: needles[i].source.clone(),
            start_s: 0,
            end_s: needles[i].duration_s,
        });
        cursor = positions[i];
    }
    if cursor < base_duration_s {
        segments.push(SpliceSegment {
            source: base_source.to_owned(),
            start_s: cursor,
            end_s: base_duration_s,
        });
    }
    let mut qas: Vec<QARecord> = base_qas
        .iter()
        .map(|q| shifted_qa(q, &video_id, |s| layout.shift(s)))
        .collect();
    let mut needle_periods = Vec::new();
    for (i, n) in needles.iter().enumerate() {
        let start = layout.starts[i];
        needle_periods
            .push(TimePeriod::new(start, start + n.duration_s).expect("non-empty needle"));
        qas.extend(
            n.qas
                .iter()
                .map(|q| shifted_qa(q, &video_id, |s| s + start)),
        );
    }
    Ok(SplicePlan {
        video_id,
        duration_s: layout.total(base_duration_s),
        segments,
        needle_periods,
        qas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_base, generate_needle, Lexicon};

    fn case(n: usize) -> (WorldSpec, Vec<Needle>) {
        let mut lex = Lexicon::new(3);
        let base = generate_base(&mut lex, "base", 3600);
        let needles = (0..n)
            .map(|i| generate_needle(&mut lex, &format!("n{i}"), 10, 4))
            .collect();
        (base, needles)
    }

    #[test]
    fn five_needles_make_twenty_questions() {
        let (base, needles) = case(5);
        let h = build_needle_haystack(&base, &[], &needles, &[100, 900, 1500, 2500, 3600]).unwrap();
        assert_eq!(h.world.duration_s, 3650);
        assert_eq!(h.qas.len(), 20);
        h.world.validate().unwrap();
        let covered: u64 = h.world.events.iter().map(|e| e.period.duration_s()).sum();
        assert_eq!(covered, 3650);
        for (qa, i) in h.qas.iter().zip((0..5).flat_map(|i| [i; 4])) {
            assert!(h.needle_periods[i].contains_second(qa.evidence_s.unwrap()));
        }
    }

    #[test]
    fn rejects_bad_positions() {
        let (base, needles) = case(2);
        assert_eq!(
            build_needle_haystack(&base, &[], &needles, &[10, 3601]),
            Err(NeedleError::OutOfBounds {
                position: 3601,
                duration_s: 3600
            })
        );
        assert_eq!(
            build_needle_haystack(&base, &[], &needles, &[10, 10]),
            Err(NeedleError::Overlap { position: 10 })
        );
    }

    #[test]
    fn zero_needles_is_identity() {
        let (base, _) = case(0);
        let h = build_needle_haystack(&base, &[], &[], &[]).unwrap();
        assert_eq!(h.world, base);
    }

    #[test]
    fn media_plan_cut_list() {
        let needle = |s: &str| MediaNeedle {
            source: s.into(),
            duration_s: 10,
            qas: vec![],
        };
        let plan = plan_media_splice(
            "v",
            "base.mp4",
            100,
            &[],
            &[needle("b.mp4"), needle("a.mp4")],
            &[60, 0],
        )
        .unwrap();
        assert_eq!(plan.duration_s, 120);
        let cuts: Vec<(&str, u64, u64)> = plan
            .segments
            .iter()
            .map(|s| (s.source.as_str(), s.start_s, s.end_s))
            .collect();
        assert_eq!(
            cuts,
            [
                ("a.mp4", 0, 10),
                ("base.mp4", 0, 60),
                ("b.mp4", 0, 10),
                ("base.mp4", 60, 100)
            ]
        );
        assert_eq!(
            plan.needle_periods,
            [
                TimePeriod::new(70, 80).unwrap(),
                TimePeriod::new(0, 10).unwrap()
            ]
        );
        assert!(plan
            .concat_script()
            .contains("file 'a.mp4'\ninpoint 0\noutpoint 10\n"));
    }
}
