//! Acceptance runner: one line per criterion, nonzero exit if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;
use std::time::Instant;

use common::checks;
use lucy_core::config::select_split;
use lucy_core::engine::{reasoning_call_bound, Engine, EngineOptions, FinalResponse, LoopState};
use lucy_core::eval::{
    build_needle_haystack, plan_media_splice, richness_relevance_curve, run_eval, shannon_entropy,
    snapshot_along, EvalOptions, FirstLabel, MediaNeedle, SimPipeline,
};
use lucy_core::memory::{divide, MemoryLevel, TimePeriod};
use lucy_core::protocol::{BackendError, DecodeParams, TextBackend, DEFAULT_MAX_REPAIRS};
use lucy_core::sim::{
    generate_base, generate_needle, generate_world, Lexicon, PlantedWorld, ScriptedCaptioner,
    ScriptedReasoner,
};
use lucy_core::ScopeConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn quiet() -> EngineOptions {
    EngineOptions {
        record_timing: false,
        ..EngineOptions::default()
    }
}

fn mlvu(duration: u64) -> Result<ScopeConfig, String> {
    select_split("mlvu", duration)
        .map(|p| p.scope)
        .ok_or_else(|| format!("no mlvu split for {duration} s"))
}

fn planted(seed: u64, duration: u64) -> Result<(PlantedWorld, ScopeConfig), String> {
    let scope = mlvu(duration)?;
    let world = generate_world(
        &mut Lexicon::new(seed),
        &format!("w{seed}"),
        duration,
        &scope,
        1,
    )
    .map_err(|e| e.to_string())?;
    Ok((world, scope))
}

fn solve(world: &PlantedWorld, scope: &ScopeConfig) -> Result<FinalResponse, String> {
    let cap = ScriptedCaptioner::new(world.world.clone(), scope.clone());
    let engine = Engine::new(scope.clone(), &ScriptedReasoner, &cap).with_options(quiet());
    engine
        .run(&world.world.meta(), &world.qas[0].render())
        .map_err(|e| e.to_string())
}

/// Fidelity suite: returns the logical call counts for criterion 2.
fn fidelity() -> (Check, Vec<u64>) {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut calls = Vec::new();
    let mut failures = Vec::new();
    for seed in 0..100u64 {
        let duration = rng.random_range(1_000..=20_000u64);
        let outcome = planted(seed, duration).and_then(|(w, scope)| {
            let r = solve(&w, &scope)?;
            calls.push(r.ledger.reasoning_logical);
            let qa = &w.qas[0];
            let second = qa.evidence_s.ok_or("no planted second")?;
            if !r.answer.starts_with(&format!("{}.", qa.answer_label)) {
                return Err(format!("answered {:?}, want {}", r.answer, qa.answer_label));
            }
            if r.iterations_used > scope.max_iterations {
                return Err(format!("{} iterations", r.iterations_used));
            }
            if r.evidence_periods.is_empty()
                || !r.evidence_periods.iter().all(|p| p.contains_second(second))
            {
                return Err(format!(
                    "evidence {:?} misses second {second}",
                    r.evidence_periods
                ));
            }
            Ok(())
        });
        if let Err(e) = outcome {
            failures.push(format!("seed {seed} ({duration} s): {e}"));
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let check = if !failures.is_empty() {
        Err(format!(
            "{}/100 failed; first: {}",
            failures.len(),
            failures[0]
        ))
    } else if elapsed >= 30.0 {
        Err(format!("100/100 correct but took {elapsed:.1} s"))
    } else {
        Ok(format!(
            "100/100 correct, evidence holds the planted second, {elapsed:.1} s"
        ))
    };
    (check, calls)
}

fn call_budget(calls: &[u64]) -> Check {
    let bound = reasoning_call_bound(5) as u64;
    if calls.is_empty() {
        return Err("no runs recorded".into());
    }
    let violations = calls.iter().filter(|c| **c > bound).count();
    let mean = calls.iter().sum::<u64>() as f64 / calls.len() as f64;
    let max = calls.iter().max().copied().unwrap_or(0);
    let line =
        format!("mean {mean:.2} logical calls, max {max}, bound {bound}, {violations} violations");
    if violations == 0 && mean < bound as f64 {
        Ok(line)
    } else {
        Err(line)
    }
}

/// Scripted reasoner that corrupts a fraction of its outputs.
struct Faulty {
    rng: Mutex<ChaCha8Rng>,
    rate: f64,
}

impl TextBackend for Faulty {
    fn complete(&self, prompt: &str, params: &DecodeParams) -> Result<String, BackendError> {
        let good = ScriptedReasoner.complete(prompt, params)?;
        let mut rng = self.rng.lock().unwrap();
        if !rng.random_bool(self.rate) {
            return Ok(good);
        }
        Ok(match rng.random_range(0..4) {
            0 => "I am not sure what to say.".to_string(),
            1 => good.chars().take(good.chars().count() / 2).collect(),
            2 => good.replace("Time Period", "Timespan"),
            _ => r#"{"Flag": True, "Confidence": True, "Time Period": [(99999999, 99999998)], "Answer": "A", "Instruction": "x", "Reason": ""}"#.to_string(),
        })
    }
}

fn invariants_run(seed: u64) -> Result<u64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let duration = rng.random_range(600..=4_000u64);
    let (world, scope) = planted(seed, duration)?;
    let scope = scope.with_max_iterations(rng.random_range(1..=5));
    let llm = Faulty {
        rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed ^ 0x5eed)),
        rate: 0.2,
    };
    let cap = ScriptedCaptioner::new(world.world.clone(), scope.clone());
    let engine = Engine::new(scope.clone(), &llm, &cap).with_options(quiet());

    let mut violations: Vec<String> = Vec::new();
    let mut prev: Option<(usize, BTreeSet<TimePeriod>)> = None;
    let mut observe = |s: &LoopState| {
        if let Some((len, explored)) = &prev {
            if s.cm.len() < *len {
                violations.push(format!("memory shrank {len} -> {}", s.cm.len()));
            }
            if !explored.is_subset(&s.explored) || s.explored.len() > explored.len() + 1 {
                violations.push(format!(
                    "explored went {} -> {}",
                    explored.len(),
                    s.explored.len()
                ));
            }
        } else if !s.explored.is_empty() {
            violations.push("explored non-empty after init".into());
        }
        for e in s.cm.iter().filter(|e| e.level != MemoryLevel::Coarse) {
            let parent_ok = s.explored.iter().any(|q| {
                q.contains(&e.period)
                    && s.cm
                        .iter()
                        .any(|p| p.period == *q && p.level.deeper() == Some(e.level))
            });
            if !parent_ok || e.period.duration_s() > scope.scope_s(e.level) {
                violations.push(format!(
                    "{:?} {} entry outside an explored parent",
                    e.period, e.level
                ));
            }
        }
        prev = Some((s.cm.len(), s.explored.clone()));
    };
    let r = engine
        .run_observed(&world.world.meta(), &world.qas[0].render(), &mut observe)
        .map_err(|e| format!("run failed: {e}"))?;
    if let Some(v) = violations.first() {
        return Err(v.clone());
    }
    if r.iterations_used > scope.max_iterations {
        return Err(format!(
            "{} iterations over {}",
            r.iterations_used, scope.max_iterations
        ));
    }
    let bound = reasoning_call_bound(scope.max_iterations) as u64;
    if r.ledger.reasoning_logical > bound {
        return Err(format!(
            "{} logical calls over {bound}",
            r.ledger.reasoning_logical
        ));
    }
    if let Some(ev) = r.trace.iter().find(|e| e.attempt > DEFAULT_MAX_REPAIRS) {
        return Err(format!("repair attempt {} over budget", ev.attempt));
    }
    if r.ledger.reasoning_calls > r.ledger.reasoning_logical * (DEFAULT_MAX_REPAIRS as u64 + 1) {
        return Err("physical calls exceed the repair budget".into());
    }
    Ok(r.ledger.repair_calls)
}

fn loop_invariants() -> Check {
    let mut failures = Vec::new();
    let mut repairs = 0;
    for seed in 0..1000 {
        match invariants_run(10_000 + seed) {
            Ok(n) => repairs += n,
            Err(e) => failures.push(format!("seed {}: {e}", 10_000 + seed)),
        }
    }
    match failures.first() {
        None => Ok(format!(
            "1000 faulty runs terminate with all invariants intact ({repairs} repairs)"
        )),
        Some(f) => Err(format!(
            "{} runs violated invariants; first: {f}",
            failures.len()
        )),
    }
}

fn brute_divide(duration: u64, scope: u64) -> Vec<(u64, u64)> {
    let mut groups: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    for s in 0..duration {
        let g = groups.entry(s / scope).or_insert((s, s));
        g.1 = s;
    }
    groups.values().map(|(a, b)| (*a, b + 1)).collect()
}

fn division_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..10_000 {
        let duration = rng.random_range(1..=4_000u64);
        let scope = rng.random_range(1..=duration + 50);
        let got: Vec<(u64, u64)> = divide(duration, scope)
            .periods()
            .iter()
            .map(|p| (p.start_s(), p.end_s()))
            .collect();
        if got != brute_divide(duration, scope) {
            return Err(format!("pair {i}: divide({duration}, {scope}) disagrees"));
        }
    }
    Ok("10000 pairs equal".into())
}

/// Straight port of the reference loop over a sorted count table.
fn oracle_entropy(text: &str) -> f64 {
    let lowered = text.to_lowercase();
    let words: Vec<&str> = lowered.split_whitespace().collect();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for w in &words {
        *counts.entry(w).or_default() += 1;
    }
    let total = words.len() as f64;
    let mut entropy = 0.0;
    for c in counts.values() {
        let p = *c as f64 / total;
        entropy -= p * p.log2();
    }
    entropy
}

fn entropy_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let vocab = [
        "a", "B", "b", "cat", "Cat", "sat", "é", "Élan", "x1", "--", "zzz", "q",
    ];
    let mut worst = 0f64;
    for i in 0..1000 {
        let n = rng.random_range(0..80);
        let text: String = (0..n)
            .map(|_| {
                let sep = [" ", "  ", "\t", "\n"][rng.random_range(0..4)];
                format!("{}{sep}", vocab[rng.random_range(0..vocab.len())])
            })
            .collect();
        let diff = (shannon_entropy(&text) - oracle_entropy(&text)).abs();
        worst = worst.max(diff);
        if diff >= 1e-9 {
            return Err(format!("string {i}: differs by {diff:e}"));
        }
    }
    let examples = [("a a b b", 1.0), ("the cat sat", 3f64.log2()), ("A a", 0.0)];
    for (text, want) in examples {
        let got = shannon_entropy(text);
        if got != want {
            return Err(format!("{text:?} gave {got}, want {want}"));
        }
    }
    Ok(format!(
        "1000 strings within {worst:e} bits, 3 examples exact"
    ))
}

fn trend_holds(seed: u64) -> Result<bool, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (world, scope) = planted(seed, rng.random_range(1_000..=20_000u64))?;
    let r = solve(&world, &scope)?;
    let question = world.qas[0].render();
    let rows = richness_relevance_curve(
        &snapshot_along(&r.memory, &r.evidence_periods),
        &question,
        &ScriptedReasoner,
        DEFAULT_MAX_REPAIRS,
    )
    .map_err(|e| e.to_string())?;
    let entropy: Option<Vec<f64>> = rows.iter().map(|r| r.entropy_mean).collect();
    let relevance: Option<Vec<f64>> = rows.iter().map(|r| r.relevance_mean).collect();
    let rising =
        |v: Option<Vec<f64>>| v.is_some_and(|v| v.len() == 3 && v.windows(2).all(|w| w[0] <= w[1]));
    Ok(rising(entropy) && rising(relevance))
}

fn richness_trend() -> Check {
    let mut holds = 0;
    for seed in 0..100 {
        if trend_holds(20_000 + seed)? {
            holds += 1;
        }
    }
    let line = format!("{holds}/100 runs non-decreasing coarse to ultra-fine");
    if holds >= 95 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn splice_world(seed: u64) -> Result<(), String> {
    let mut lex = Lexicon::new(seed);
    let base_duration = lex.rng().random_range(1_000..=6_000u64);
    let base = generate_base(&mut lex, &format!("base{seed}"), base_duration);
    let needles: Vec<_> = (0..5)
        .map(|i| {
            let d = lex.rng().random_range(20..=90u64);
            generate_needle(&mut lex, &format!("n{seed}-{i}"), d, 4)
        })
        .collect();
    let mut positions = BTreeSet::new();
    while positions.len() < 5 {
        positions.insert(lex.rng().random_range(0..=base_duration));
    }
    let mut positions: Vec<u64> = positions.into_iter().collect();
    // Feed needles in shuffled order so the layout has to sort them.
    positions.rotate_left((seed % 5) as usize);

    let hay = build_needle_haystack(&base, &[], &needles, &positions).map_err(|e| e.to_string())?;
    let inserted: u64 = needles.iter().map(|n| n.world.duration_s).sum();
    if hay.world.duration_s != base_duration + inserted {
        return Err(format!(
            "duration {} != {} + {inserted}",
            hay.world.duration_s, base_duration
        ));
    }
    hay.world.validate().map_err(|e| e.to_string())?;
    if hay.qas.len() != 20 {
        return Err(format!("{} questions", hay.qas.len()));
    }
    for (i, period) in hay.needle_periods.iter().enumerate() {
        for qa in hay
            .qas
            .iter()
            .filter(|q| q.id.starts_with(&format!("n{seed}-{i}-")))
        {
            let s = qa.evidence_s.ok_or("missing timestamp")?;
            if !period.contains_second(s) {
                return Err(format!("{} at {s} s outside needle {period:?}", qa.id));
            }
        }
    }

    let media: Vec<MediaNeedle> = needles
        .iter()
        .map(|n| MediaNeedle {
            source: format!("{}.mp4", n.world.video_id),
            duration_s: n.world.duration_s,
            qas: n.qas.clone(),
        })
        .collect();
    let plan = plan_media_splice(
        &base.video_id,
        "base.mp4",
        base_duration,
        &[],
        &media,
        &positions,
    )
    .map_err(|e| e.to_string())?;
    let cut: u64 = plan.segments.iter().map(|s| s.end_s - s.start_s).sum();
    if plan.duration_s != hay.world.duration_s
        || cut != plan.duration_s
        || plan.needle_periods != hay.needle_periods
    {
        return Err("media cut list disagrees with the simulated splice".into());
    }

    let scope = mlvu(hay.world.duration_s)?;
    let pipeline = SimPipeline::new([hay.world.clone()], scope);
    let report = run_eval(&hay.qas, &pipeline, &FirstLabel, EvalOptions::default())
        .map_err(|e| e.to_string())?;
    if report.correct != 20 {
        let miss = report
            .outcomes
            .iter()
            .find(|o| o.predicted_label.as_deref() != Some(o.answer_label.as_str()));
        return Err(format!(
            "{}/20 answered; first miss {:?}",
            report.correct,
            miss.map(|m| (
                &m.id,
                &m.answer,
                m.forced,
                m.iterations_used,
                m.evidence_contains_truth
            ))
        ));
    }
    Ok(())
}

fn needle_splice() -> Check {
    for seed in 0..20 {
        splice_world(30_000 + seed).map_err(|e| format!("world {}: {e}", 30_000 + seed))?;
    }
    Ok(
        "20 plans: durations add up, timestamps land in their needles, 20/20 answered per world"
            .into(),
    )
}

fn contracts() -> Check {
    let a = checks::golden_templates()?;
    let b = checks::parser_round_trip(10_000, 8)?;
    let c = checks::wire_conformance()?;
    Ok(format!("{a}; {b}; {c}"))
}

fn main() {
    let (c1, calls) = fidelity();
    let results: Vec<(usize, Check)> = vec![
        (1, c1),
        (2, call_budget(&calls)),
        (3, loop_invariants()),
        (4, division_oracle()),
        (5, entropy_oracle()),
        (6, richness_trend()),
        (7, needle_splice()),
        (8, contracts()),
        (9, checks::preset_table()),
    ];
    let mut failed = 0;
    for (n, r) in &results {
        match r {
            Ok(detail) => println!("criterion {n}: PASS - {detail}"),
            Err(reason) => {
                failed += 1;
                println!("criterion {n}: FAIL - {reason}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
