//! Contract checks shared by the focused tests and the acceptance runner.
//! Each returns a one-line summary on success and a reason on failure.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Duration;

use lucy_core::config::{preset_table_csv, Fps};
use lucy_core::media::FrameExtractor;
use lucy_core::memory::{divide, MemoryEntry, MemoryLevel, MemoryList, TimePeriod, VideoMeta};
use lucy_core::protocol::http::{HttpCaptionBackend, HttpConfig, HttpTextBackend};
use lucy_core::protocol::{
    parse_answer, parse_init_localization, parse_locate_and_instruct, render_answer_prompt,
    render_init_localization_prompt, render_locate_and_instruct_prompt, render_relevance_prompt,
    AnswerResponse, BackendError, CaptionBackend, ClipRequest, DecodeParams,
    InitLocalizationResponse, LocateAndInstructResponse, TextBackend, NO_ANSWER,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::stub::{chat_reply, stub_decoder, StubServer};

pub type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn tp(s: u64, e: u64) -> TimePeriod {
    TimePeriod::new(s, e).unwrap()
}

pub const GOLDEN_QUESTION: &str =
    "What color is the umbrella the man opens?\nA. red\nB. blue\nC. green\nD. black";
pub const GOLDEN_TEXT: &str = "He opens a red umbrella while sitting.";

pub fn golden_memory() -> MemoryList {
    [
        MemoryEntry::new(
            tp(0, 200),
            MemoryLevel::Coarse,
            "A man walks a dog along the river.",
            "",
        ),
        MemoryEntry::new(
            tp(200, 400),
            MemoryLevel::Coarse,
            "The man sits on a bench.",
            "",
        ),
        MemoryEntry::new(tp(200, 210), MemoryLevel::Fine, GOLDEN_TEXT, ""),
    ]
    .into_iter()
    .collect()
}

/// The four agent templates must match the checked-in renderings byte for byte.
pub fn golden_templates() -> Check {
    let cm = golden_memory();
    let explored = BTreeSet::from([tp(0, 200)]);
    let rendered = [
        (
            "init_localization",
            render_init_localization_prompt(&cm, GOLDEN_QUESTION, 3).unwrap(),
        ),
        (
            "locate_and_instruct",
            render_locate_and_instruct_prompt(&cm, GOLDEN_QUESTION, &explored, 400).unwrap(),
        ),
        (
            "answer",
            render_answer_prompt(&cm, GOLDEN_QUESTION, 400, false).unwrap(),
        ),
        (
            "relevance",
            render_relevance_prompt(GOLDEN_TEXT, GOLDEN_QUESTION),
        ),
    ];
    for (name, text) in &rendered {
        let path = golden_dir().join(format!("{name}.txt"));
        let want =
            std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        if *text != want {
            let line = text
                .lines()
                .zip(want.lines())
                .position(|(a, b)| a != b)
                .unwrap_or(0);
            return Err(format!("{name} differs from golden near line {}", line + 1));
        }
    }
    Ok(format!("{} templates byte-equal", rendered.len()))
}

pub fn preset_table() -> Check {
    let want =
        std::fs::read_to_string(golden_dir().join("presets.csv")).map_err(|e| e.to_string())?;
    let got = preset_table_csv();
    ensure(got == want, || format!("preset table differs:\n{got}"))?;
    Ok(format!("{} presets match", want.lines().count() - 1))
}

const ALPHABET: &[char] = &[
    'a', 'b', 'Z', ' ', '"', '\'', '\\', '{', '}', '(', ')', ',', ':', 'é', '中', '\n', '\t', '1',
    '-', '“', '”',
];

fn text(rng: &mut ChaCha8Rng, min: usize) -> String {
    let n = rng.random_range(min..24);
    let mut s: String = (0..n).map(|_| *ALPHABET.choose(rng).unwrap()).collect();
    if min > 0 {
        s.insert(0, 'x');
    }
    s
}

/// Serialize random well-formed responses and parse them back.
pub fn parser_round_trip(cases: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..cases {
        let duration = rng.random_range(1..20_000u64);
        let scope = rng.random_range(1..=800u64);
        let candidates = divide(duration, scope).periods().to_vec();
        let fail = |what: &str, raw: &str, e: String| format!("case {i} ({what}): {e}\n{raw}");
        match i % 3 {
            0 => {
                let flag = rng.random_bool(0.7);
                let want = if flag {
                    let k = rng.random_range(1..=3.min(candidates.len()));
                    let mut picked: Vec<TimePeriod> =
                        candidates.choose_multiple(&mut rng, k).copied().collect();
                    picked.dedup();
                    InitLocalizationResponse {
                        flag,
                        periods: picked,
                        reason: text(&mut rng, 0),
                    }
                } else {
                    InitLocalizationResponse {
                        flag,
                        periods: vec![],
                        reason: text(&mut rng, 0),
                    }
                };
                let raw = want.to_dict_text();
                let got = parse_init_localization(&raw, &candidates, 3)
                    .map_err(|e| fail("init", &raw, e.to_string()))?;
                ensure(got == want, || {
                    fail("init", &raw, format!("{got:?} != {want:?}"))
                })?;
            }
            1 => {
                let want = LocateAndInstructResponse {
                    period: *candidates.choose(&mut rng).unwrap(),
                    instruction: text(&mut rng, 1),
                    reason: text(&mut rng, 0),
                };
                let raw = want.to_dict_text();
                let got = parse_locate_and_instruct(&raw, &candidates)
                    .map_err(|e| fail("locate", &raw, e.to_string()))?;
                ensure(got == want, || {
                    fail("locate", &raw, format!("{got:?} != {want:?}"))
                })?;
            }
            _ => {
                let want = if rng.random_bool(0.5) {
                    let k = rng.random_range(1..=4);
                    AnswerResponse {
                        confidence: true,
                        answer: text(&mut rng, 1),
                        periods: (0..k)
                            .map(|_| {
                                let s = rng.random_range(0..duration);
                                tp(s, rng.random_range(s + 1..=duration + 1))
                            })
                            .collect(),
                        reason: text(&mut rng, 0),
                    }
                } else {
                    AnswerResponse {
                        confidence: false,
                        answer: NO_ANSWER.into(),
                        periods: vec![],
                        reason: text(&mut rng, 0),
                    }
                };
                let raw = want.to_dict_text();
                let got = parse_answer(&raw).map_err(|e| fail("answer", &raw, e.to_string()))?;
                ensure(got == want, || {
                    fail("answer", &raw, format!("{got:?} != {want:?}"))
                })?;
            }
        }
    }
    Ok(format!("{cases} responses round-tripped"))
}

fn config(url: &str) -> HttpConfig {
    let mut c = HttpConfig::new(url, "test-model");
    c.api_key = Some("sk-test".into());
    c.backoff = Duration::from_millis(1);
    c.timeout = Duration::from_secs(10);
    c
}

/// Request shape, bearer auth and retry policy against a local stub server.
pub fn wire_conformance() -> Check {
    // Shape and auth.
    let server = StubServer::spawn(vec![(200, chat_reply("hello"))]);
    let llm = HttpTextBackend::new(config(&server.url)).map_err(|e| e.to_string())?;
    let out = llm
        .complete("PROMPT", &DecodeParams::default())
        .map_err(|e| e.to_string())?;
    ensure(out == "hello", || format!("content {out:?}"))?;
    let req = server.requests().pop().ok_or("no request captured")?;
    ensure(
        req.method == "POST" && req.path == "/v1/chat/completions",
        || format!("{} {}", req.method, req.path),
    )?;
    ensure(
        req.header("authorization") == Some("Bearer sk-test"),
        || format!("auth {:?}", req.header("authorization")),
    )?;
    let want = serde_json::json!({
        "model": "test-model",
        "messages": [{"role": "user", "content": "PROMPT"}],
        "temperature": 0.0,
    });
    ensure(req.body == want, || format!("body {}", req.body))?;

    // 5xx is retried with backoff until success.
    let server = StubServer::spawn(vec![
        (500, "{}".into()),
        (503, "{}".into()),
        (200, chat_reply("recovered")),
    ]);
    let llm = HttpTextBackend::new(config(&server.url)).map_err(|e| e.to_string())?;
    let out = llm
        .complete("p", &DecodeParams::default())
        .map_err(|e| e.to_string())?;
    ensure(out == "recovered" && server.requests().len() == 3, || {
        format!("retry: {out:?}, {} requests", server.requests().len())
    })?;

    // Retries are bounded: 1 attempt + 3 retries.
    let server = StubServer::spawn(vec![(502, "bad gateway".into()); 4]);
    let llm = HttpTextBackend::new(config(&server.url)).map_err(|e| e.to_string())?;
    let err = llm.complete("p", &DecodeParams::default()).unwrap_err();
    ensure(
        matches!(err, BackendError::Status { status: 502, .. }),
        || format!("exhaustion error {err}"),
    )?;
    ensure(server.requests().len() == 4, || {
        format!("{} requests before giving up", server.requests().len())
    })?;

    // 4xx is not retried.
    let server = StubServer::spawn(vec![
        (401, "{\"error\":\"no\"}".into()),
        (200, chat_reply("late")),
    ]);
    let llm = HttpTextBackend::new(config(&server.url)).map_err(|e| e.to_string())?;
    let err = llm.complete("p", &DecodeParams::default()).unwrap_err();
    ensure(
        matches!(err, BackendError::Status { status: 401, .. }),
        || format!("4xx error {err}"),
    )?;
    ensure(server.requests().len() == 1, || "4xx was retried".into())?;

    // Captions carry the instruction then one JPEG data URL per frame.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let source = dir.path().join("clip.mp4");
    std::fs::write(&source, b"not really a video").map_err(|e| e.to_string())?;
    let decoder = stub_decoder(dir.path(), 16, 8);
    let server = StubServer::spawn(vec![(200, chat_reply("a caption"))]);
    let cap = HttpCaptionBackend::new(config(&server.url), FrameExtractor::new(decoder))
        .map_err(|e| e.to_string())?;
    let request = ClipRequest {
        video: VideoMeta::new("v", 100, source.to_string_lossy()).unwrap(),
        period: tp(10, 20),
        fps: Fps::whole(2),
        instruction: "Describe.".into(),
    };
    let out = cap.caption(&request).map_err(|e| e.to_string())?;
    ensure(out == "a caption", || format!("caption {out:?}"))?;
    let req = server.requests().pop().ok_or("no caption request")?;
    let parts = req.body["messages"][0]["content"]
        .as_array()
        .ok_or("content is not a list")?
        .clone();
    ensure(parts.len() == 21, || {
        format!("{} content parts", parts.len())
    })?;
    ensure(
        parts[0] == serde_json::json!({"type": "text", "text": "Describe."}),
        || format!("first part {}", parts[0]),
    )?;
    for p in &parts[1..] {
        let url = p["image_url"]["url"].as_str().unwrap_or_default();
        ensure(
            p["type"] == "image_url" && url.starts_with("data:image/jpeg;base64,/9j/"),
            || format!("image part {p}"),
        )?;
    }
    Ok("shape, auth, 5xx retry, bounded retries, 4xx no-retry, caption parts".into())
}
