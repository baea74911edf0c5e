//! Strict parsers over agent completions, and the inverse serializers used by
//! scripted agents and round-trip tests.

use serde::{Deserialize, Serialize};

use super::literal::{extract_dictionary, parse_literal, Literal};
use super::{ParseError, ProtocolError};
use crate::memory::TimePeriod;

pub const NO_ANSWER: &str = "No Answer";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitLocalizationResponse {
    pub flag: bool,
    pub periods: Vec<TimePeriod>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocateAndInstructResponse {
    pub period: TimePeriod,
    pub instruction: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerResponse {
    pub confidence: bool,
    pub answer: String,
    pub periods: Vec<TimePeriod>,
    pub reason: String,
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn tuples(periods: &[TimePeriod]) -> String {
    let items: Vec<String> = periods
        .iter()
        .map(|p| format!("({}, {})", p.start_s(), p.end_s()))
        .collect();
    format!("[{}]", items.join(", "))
}

fn py_bool(b: bool) -> &'static str {
    if b {
        "True"
    } else {
        "False"
    }
}

impl InitLocalizationResponse {
    pub fn to_dict_text(&self) -> String {
        let periods = if self.flag {
            tuples(&self.periods)
        } else {
            quote("No Time Periods")
        };
        format!(
            "{{\"Flag\": {}, \"Time Period\": {}, \"Reason\": {}}}",
            py_bool(self.flag),
            periods,
            quote(&self.reason)
        )
    }
}

impl LocateAndInstructResponse {
    pub fn to_dict_text(&self) -> String {
        format!(
            "{{\"Time Period\": {}, \"Instruction\": {}, \"Reason\": {}}}",
            tuples(std::slice::from_ref(&self.period)),
            quote(&self.instruction),
            quote(&self.reason)
        )
    }
}

impl AnswerResponse {
    pub fn unconfident(reason: impl Into<String>) -> Self {
        Self {
            confidence: false,
            answer: NO_ANSWER.into(),
            periods: Vec::new(),
            reason: reason.into(),
        }
    }

    pub fn to_dict_text(&self) -> String {
        let periods = if self.confidence {
            tuples(&self.periods)
        } else {
            quote("No Time")
        };
        format!(
            "{{\"Confidence\": {}, \"Answer\": {}, \"Time Period\": {}, \"Reason\": {}}}",
            py_bool(self.confidence),
            quote(&self.answer),
            periods,
            quote(&self.reason)
        )
    }
}

fn dictionary(raw: &str) -> Result<Literal, ParseError> {
    extract_dictionary(raw).ok_or(ParseError::NoDictionary)
}

fn required<'a>(dict: &'a Literal, key: &'static str) -> Result<&'a Literal, ParseError> {
    dict.get(key).ok_or(ParseError::MissingKey(key))
}

fn bool_field(dict: &Literal, key: &'static str) -> Result<bool, ParseError> {
    match required(dict, key)? {
        Literal::Bool(b) => Ok(*b),
        Literal::Str(s) => match s.trim().to_ascii_lowercase().as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(ParseError::BadValue {
                key,
                reason: format!("expected a bool, got {s:?}"),
            }),
        },
        other => Err(ParseError::BadValue {
            key,
            reason: format!("expected a bool, got {other:?}"),
        }),
    }
}

fn string_field(dict: &Literal, key: &'static str) -> Result<String, ParseError> {
    match required(dict, key)? {
        Literal::Str(s) => Ok(s.clone()),
        Literal::Int(i) => Ok(i.to_string()),
        Literal::Float(f) => Ok(f.to_string()),
        other => Err(ParseError::BadValue {
            key,
            reason: format!("expected a string, got {other:?}"),
        }),
    }
}

/// Reason is informational; tolerate its absence.
fn reason_field(dict: &Literal) -> String {
    match dict.get("Reason") {
        Some(Literal::Str(s)) => s.clone(),
        _ => String::new(),
    }
}

/// Seconds from a number or a string like `"400"`, `"400s"`, `"06:40"`, `"1:06:40"`.
fn seconds(lit: &Literal) -> Option<f64> {
    match lit {
        Literal::Int(_) | Literal::Float(_) => lit.as_f64(),
        Literal::Str(s) => {
            let s = s.trim().trim_end_matches(['s', 'S']).trim();
            if s.contains(':') {
                let mut total = 0.0;
                for part in s.split(':') {
                    total = total * 60.0 + part.trim().parse::<f64>().ok()?;
                }
                Some(total)
            } else {
                s.parse().ok()
            }
        }
        _ => None,
    }
}

type RawSpan = (u64, u64);

fn span(lit: &Literal) -> Option<RawSpan> {
    let items = match lit {
        Literal::Tuple(v) | Literal::List(v) if v.len() == 2 => v,
        _ => return None,
    };
    let a = seconds(&items[0])?;
    let b = seconds(&items[1])?;
    if !(a.is_finite() && b.is_finite()) {
        return None;
    }
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    Some((lo.max(0.0).floor() as u64, hi.max(0.0).ceil() as u64))
}

/// `Ok(None)` means an explicit "no periods" marker.
fn spans_field(dict: &Literal, key: &'static str) -> Result<Option<Vec<RawSpan>>, ParseError> {
    let bad = |reason: String| ParseError::BadValue { key, reason };
    let value = required(dict, key)?;
    match value {
        Literal::Null => Ok(None),
        Literal::Str(s) => {
            if let Some(inner) = parse_literal(s) {
                if !matches!(inner, Literal::Str(_)) {
                    return list_spans(&inner).map(Some).map_err(bad);
                }
            }
            if s.trim().to_ascii_lowercase().starts_with("no") {
                Ok(None)
            } else {
                Err(bad(format!("unrecognized period text {s:?}")))
            }
        }
        other => list_spans(other).map(Some).map_err(bad),
    }
}

fn list_spans(lit: &Literal) -> Result<Vec<RawSpan>, String> {
    match lit {
        Literal::List(items) | Literal::Tuple(items) => {
            let nested = items
                .iter()
                .any(|i| matches!(i, Literal::List(_) | Literal::Tuple(_)));
            if items.is_empty() {
                Ok(Vec::new())
            } else if !nested {
                // A bare `(start, end)` or `[start, end]`.
                span(lit)
                    .map(|s| vec![s])
                    .ok_or_else(|| format!("bad period {lit:?}"))
            } else {
                items
                    .iter()
                    .map(|it| span(it).ok_or_else(|| format!("bad period {it:?}")))
                    .collect()
            }
        }
        other => Err(format!(
            "expected a list of (start, end) tuples, got {other:?}"
        )),
    }
}

/// Map an agent-supplied `(start, end)` onto a candidate period: an exact
/// match if present, else the candidate with maximal overlap (ties go to the
/// earlier candidate). Ends beyond the last candidate are clamped; a
/// zero-length span is treated as the single second at its start.
pub fn snap_period(raw: RawSpan, candidates: &[TimePeriod]) -> Result<TimePeriod, ProtocolError> {
    let out_of_range = || ProtocolError::OutOfRange {
        start: raw.0,
        end: raw.1,
    };
    let limit = candidates
        .iter()
        .map(TimePeriod::end_s)
        .max()
        .ok_or_else(out_of_range)?;
    let (start, end) = raw;
    if start >= limit {
        return Err(out_of_range());
    }
    let end = end.min(limit);
    let target = if end > start {
        TimePeriod::new(start, end).expect("checked start < end")
    } else {
        TimePeriod::new(start, start + 1).expect("start + 1 > start")
    };
    if candidates.contains(&target) {
        return Ok(target);
    }
    let mut best: Option<(u64, TimePeriod)> = None;
    let mut sorted: Vec<TimePeriod> = candidates.to_vec();
    sorted.sort();
    for c in sorted {
        let ov = c.overlap_s(&target);
        if ov > 0 && best.is_none_or(|(b, _)| ov > b) {
            best = Some((ov, c));
        }
    }
    best.map(|(_, p)| p).ok_or_else(out_of_range)
}

/// Parse the sparse-initialization response. `max_periods` is the requested
/// count; between one and that many periods are accepted when the flag is set.
pub fn parse_init_localization(
    raw: &str,
    candidates: &[TimePeriod],
    max_periods: usize,
) -> Result<InitLocalizationResponse, ProtocolError> {
    let dict = dictionary(raw)?;
    let flag = bool_field(&dict, "Flag")?;
    let spans = spans_field(&dict, "Time Period")?;
    let reason = reason_field(&dict);
    if !flag {
        return Ok(InitLocalizationResponse {
            flag,
            periods: Vec::new(),
            reason,
        });
    }
    let spans = spans.unwrap_or_default();
    if spans.is_empty() || spans.len() > max_periods {
        return Err(ParseError::Cardinality(format!(
            "expected 1 to {max_periods} periods when Flag is True, got {}",
            spans.len()
        ))
        .into());
    }
    let mut periods = Vec::with_capacity(spans.len());
    for s in spans {
        let p = snap_period(s, candidates)?;
        if !periods.contains(&p) {
            periods.push(p);
        }
    }
    Ok(InitLocalizationResponse {
        flag,
        periods,
        reason,
    })
}

pub fn parse_locate_and_instruct(
    raw: &str,
    candidates: &[TimePeriod],
) -> Result<LocateAndInstructResponse, ProtocolError> {
    let dict = dictionary(raw)?;
    let spans = spans_field(&dict, "Time Period")?.unwrap_or_default();
    if spans.len() != 1 {
        return Err(ParseError::Cardinality(format!(
            "expected single period, got {}",
            spans.len()
        ))
        .into());
    }
    let instruction = string_field(&dict, "Instruction")?;
    if instruction.trim().is_empty() {
        return Err(ParseError::BadValue {
            key: "Instruction",
            reason: "empty instruction".into(),
        }
        .into());
    }
    let period = snap_period(spans[0], candidates)?;
    Ok(LocateAndInstructResponse {
        period,
        instruction,
        reason: reason_field(&dict),
    })
}

pub fn parse_answer(raw: &str) -> Result<AnswerResponse, ProtocolError> {
    let dict = dictionary(raw)?;
    let confidence = bool_field(&dict, "Confidence")?;
    let answer = string_field(&dict, "Answer")?;
    let spans = spans_field(&dict, "Time Period")?.unwrap_or_default();
    let mut reason = reason_field(&dict);
    let answer_blank = answer.trim().is_empty() || answer.trim() == NO_ANSWER;

    if !confidence {
        // Unambiguous repairs: stray answer text moves into the reason, stray
        // periods are dropped.
        if !answer_blank {
            if !reason.is_empty() {
                reason.push(' ');
            }
            reason.push_str(&format!("(unconfident answer: {answer})"));
        }
        return Ok(AnswerResponse::unconfident(reason));
    }
    if answer_blank {
        return Err(ParseError::Invariant("confident response without an answer".into()).into());
    }
    if spans.is_empty() {
        return Err(ParseError::Invariant("confident response without time periods".into()).into());
    }
    let periods = spans
        .into_iter()
        .map(|(s, e)| TimePeriod::new(s, e.max(s + 1)).expect("end forced past start"))
        .collect();
    Ok(AnswerResponse {
        confidence,
        answer,
        periods,
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::divide;

    fn p(a: u64, b: u64) -> TimePeriod {
        TimePeriod::new(a, b).unwrap()
    }

    #[test]
    fn init_flag_true_snaps_to_division() {
        let d = divide(3600, 200);
        let raw = r#"{"Flag": true, "Time Period": [(400,600),(1000,1200),(2000,2200)], "Reason": "..."}"#;
        let r = parse_init_localization(raw, d.periods(), 3).unwrap();
        assert!(r.flag);
        assert_eq!(r.periods, vec![p(400, 600), p(1000, 1200), p(2000, 2200)]);

        // Off-grid spans: (390, 610) overlaps [400,600) by 200; (1150, 1260)
        // overlaps [1000,1200) by 50 and [1200,1400) by 60; (2300, 2300) is a
        // point inside [2200,2400).
        let raw = r#"{"Flag": True, "Time Period": [(390, 610), (1150, 1260), (2300, 2300)], "Reason": ""}"#;
        let r = parse_init_localization(raw, d.periods(), 3).unwrap();
        assert_eq!(r.periods, vec![p(400, 600), p(1200, 1400), p(2200, 2400)]);
    }

    #[test]
    fn init_flag_false() {
        let d = divide(3600, 200);
        let raw = r#"{"Flag": false, "Time Period": "No Time Periods", "Reason": "..."}"#;
        let r = parse_init_localization(raw, d.periods(), 3).unwrap();
        assert!(!r.flag && r.periods.is_empty());
        assert!(matches!(
            parse_init_localization("garbage", d.periods(), 3),
            Err(ProtocolError::Parse(ParseError::NoDictionary))
        ));
    }

    #[test]
    fn init_cardinality() {
        let d = divide(3600, 200);
        let raw = r#"{"Flag": True, "Time Period": [(0,200),(200,400),(400,600),(600,800)], "Reason": ""}"#;
        assert!(parse_init_localization(raw, d.periods(), 3).is_err());
        let raw = r#"{"Flag": True, "Time Period": [], "Reason": ""}"#;
        assert!(parse_init_localization(raw, d.periods(), 3).is_err());
    }

    #[test]
    fn snapping_edges() {
        let d = divide(450, 200);
        // Tie between [0,200) and [200,400): 50 s each, earlier wins.
        assert_eq!(snap_period((150, 250), d.periods()).unwrap(), p(0, 200));
        assert_eq!(snap_period((420, 9999), d.periods()).unwrap(), p(400, 450));
        assert!(matches!(
            snap_period((450, 500), d.periods()),
            Err(ProtocolError::OutOfRange { .. })
        ));
        // Gap between candidates: no overlap with either.
        let sparse = [p(0, 10), p(100, 110)];
        assert!(snap_period((50, 60), &sparse).is_err());
        // Exact match beats a containing period.
        let mixed = [p(0, 10), p(0, 200)];
        assert_eq!(snap_period((0, 200), &mixed).unwrap(), p(0, 200));
        assert_eq!(snap_period((0, 10), &mixed).unwrap(), p(0, 10));
    }

    #[test]
    fn locate_examples() {
        let d = divide(3600, 200);
        let raw =
            r#"{"Time Period": [(200, 400)], "Instruction": "Focus on the dog.", "Reason": "r"}"#;
        let r = parse_locate_and_instruct(raw, d.periods()).unwrap();
        assert_eq!(r.period, p(200, 400));
        assert_eq!(r.instruction, "Focus on the dog.");

        let bare = r#"{"Time Period": (210, 390), "Instruction": "x", "Reason": "r"}"#;
        assert_eq!(
            parse_locate_and_instruct(bare, d.periods()).unwrap().period,
            p(200, 400)
        );

        let two = r#"{"Time Period": [(0, 200), (200, 400)], "Instruction": "x", "Reason": "r"}"#;
        match parse_locate_and_instruct(two, d.periods()) {
            Err(ProtocolError::Parse(ParseError::Cardinality(msg))) => {
                assert!(msg.contains("expected single period"))
            }
            other => panic!("unexpected {other:?}"),
        }
        let missing = r#"{"Time Period": [(0, 200)], "Reason": "r"}"#;
        assert!(matches!(
            parse_locate_and_instruct(missing, d.periods()),
            Err(ProtocolError::Parse(ParseError::MissingKey("Instruction")))
        ));
    }

    #[test]
    fn answer_examples() {
        let r = parse_answer(
            r#"{"Confidence": true, "Answer": "B", "Time Period": [(120,130)], "Reason": "..."}"#,
        )
        .unwrap();
        assert!(r.confidence);
        assert_eq!(r.answer, "B");
        assert_eq!(r.periods, vec![p(120, 130)]);

        let r = parse_answer(r#"{"Confidence": false, "Answer": "No Answer", "Time Period": "No Time", "Reason": "..."}"#).unwrap();
        assert!(!r.confidence && r.periods.is_empty() && r.answer == NO_ANSWER);

        let e = parse_answer(
            r#"{"Confidence": true, "Answer": "B", "Time Period": [], "Reason": "..."}"#,
        );
        assert!(matches!(
            e,
            Err(ProtocolError::Parse(ParseError::Invariant(_)))
        ));
    }

    #[test]
    fn answer_repairs_unconfident_text() {
        let r = parse_answer(r#"{"Confidence": False, "Answer": "maybe B", "Time Period": [(1, 2)], "Reason": "unsure"}"#).unwrap();
        assert_eq!(r.answer, NO_ANSWER);
        assert!(r.periods.is_empty());
        assert!(r.reason.contains("maybe B"));
    }

    #[test]
    fn answer_accepts_clock_strings_and_points() {
        let r = parse_answer(r#"{"Confidence": True, "Answer": "A", "Time Period": [("01:00", "01:10"), (90, 90)], "Reason": ""}"#).unwrap();
        assert_eq!(r.periods, vec![p(60, 70), p(90, 91)]);
    }

    #[test]
    fn serializers_round_trip() {
        let d = divide(3600, 200);
        let init = InitLocalizationResponse {
            flag: true,
            periods: vec![p(400, 600), p(0, 200)],
            reason: "a \"q\"".into(),
        };
        assert_eq!(
            parse_init_localization(&init.to_dict_text(), d.periods(), 3).unwrap(),
            init
        );
        let loc = LocateAndInstructResponse {
            period: p(200, 400),
            instruction: "look {here}".into(),
            reason: "".into(),
        };
        assert_eq!(
            parse_locate_and_instruct(&loc.to_dict_text(), d.periods()).unwrap(),
            loc
        );
        let ans = AnswerResponse::unconfident("nope");
        assert_eq!(parse_answer(&ans.to_dict_text()).unwrap(), ans);
    }
}
