mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lucy_core::engine::{
    reasoning_call_bound, write_trace, Engine, EngineError, FinalResponse, LoopState,
};
use lucy_core::eval::{
    build_needle_haystack, curve_csv, load_qas, plan_media_splice, richness_relevance_curve,
    run_eval, snapshot_along, AnswerMatcher, EvalError, EvalOptions, FirstLabel, JudgeMatcher,
    MediaNeedle, Needle, NeedleError, Pipeline, PipelineError, QARecord,
};
use lucy_core::media::{probe_duration, CacheError, FrameExtractor, MediaError, MemoryCache};
use lucy_core::memory::{divide, MemoryError, MemoryLevel, VideoMeta};
use lucy_core::protocol::http::{HttpCaptionBackend, HttpTextBackend};
use lucy_core::protocol::{BackendError, CaptionBackend, ProtocolError, TextBackend};
use lucy_core::sim::{
    generate_base, generate_needle, generate_world, Lexicon, ScriptedCaptioner, ScriptedReasoner,
    WorldError, WorldSpec,
};
use lucy_core::ScopeConfig;
use serde_json::json;

use config::{config_error, Config, ConfigError};

const WORLD_SUFFIX: &str = ".world.json";
const QA_SUFFIX: &str = ".qa.json";
const MEDIA_EXTENSIONS: &[&str] = &["mp4", "mkv", "webm", "mov", "avi"];

#[derive(Parser)]
#[command(
    name = "lucy",
    version,
    about = "Long-video question answering over hierarchical captions"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Global {
    /// TOML configuration file (default: ./lucy.toml when present).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Scope preset, e.g. lvbench-long or egomem.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    /// Override the preset's iteration limit.
    #[arg(long = "max-iters", global = true, value_name = "N")]
    max_iters: Option<usize>,
    /// Structured output on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Print the planned call budget and stop.
    #[arg(long = "dry-run", global = true)]
    dry_run: bool,
    /// Count failed evaluation records as incorrect instead of dropping them.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Build (or load) the coarse memory of a video.
    Memorize { video: PathBuf },
    /// Answer one question about a video.
    Ask { video: PathBuf, question: String },
    /// Score a QA file; writes report.json and report.csv.
    Eval {
        qa_file: PathBuf,
        /// Directory holding `<video_id>.world.json` or `<video_id>.<ext>` media.
        #[arg(long, default_value = ".")]
        videos: PathBuf,
        #[arg(long, default_value = "eval-out")]
        out: PathBuf,
        /// Map answers to labels with the reasoning backend instead of the first label token.
        #[arg(long)]
        judge: bool,
    },
    /// Entropy and relevance per memory level along the evidence; writes levels.csv.
    Curve {
        video: PathBuf,
        question: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Generate a seeded simulated world and its questions.
    Simgen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Length in seconds.
        #[arg(long, default_value_t = 3600)]
        duration: u64,
        /// Planted facts (one question each). Zero gives filler only.
        #[arg(long, default_value_t = 1)]
        facts: usize,
        /// Generate a short needle clip with this many questions instead.
        #[arg(long, value_name = "QUESTIONS")]
        needle: Option<usize>,
        #[arg(long)]
        id: Option<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Splice needle clips into a base video at the given base-time positions.
    Needle {
        #[arg(long)]
        base: PathBuf,
        #[arg(long = "needle", required = true)]
        needles: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', required = true)]
        positions: Vec<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

/// The error chain, skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

/// 2 config, 3 media, 4 backend or parse, 5 budget, 1 anything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let chain: Vec<&(dyn std::error::Error + 'static)> = err.chain().collect();
    let any = |f: &dyn Fn(&(dyn std::error::Error + 'static)) -> bool| chain.iter().any(|e| f(*e));
    if any(&|e| matches!(e.downcast_ref(), Some(EngineError::Budget { .. }))) {
        return 5;
    }
    if any(&|e| e.is::<MediaError>() || matches!(e.downcast_ref(), Some(BackendError::Media(_)))) {
        return 3;
    }
    if any(&|e| e.is::<ConfigError>() || e.is::<CacheError>()) {
        return 2;
    }
    if any(&|e| e.is::<EngineError>() || e.is::<BackendError>() || e.is::<ProtocolError>()) {
        return 4;
    }
    if any(&|e| {
        e.is::<WorldError>()
            || e.is::<EvalError>()
            || e.is::<NeedleError>()
            || e.is::<MemoryError>()
            || e.is::<std::io::Error>()
    }) {
        return 2;
    }
    1
}

struct Ctx {
    global: Global,
    config: Config,
}

/// A video to work on: a simulated world or a media file.
enum Source {
    Sim(WorldSpec),
    Media(VideoMeta),
}

impl Source {
    fn meta(&self) -> VideoMeta {
        match self {
            Source::Sim(w) => w.meta(),
            Source::Media(m) => m.clone(),
        }
    }
}

fn is_world(path: &Path) -> bool {
    path.to_string_lossy().ends_with(WORLD_SUFFIX)
}

fn media_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string_lossy().into_owned())
}

fn load_world(path: &Path) -> Result<WorldSpec> {
    WorldSpec::load(path).with_context(|| format!("loading world {}", path.display()))
}

/// Sibling QA file of a world or media path, if any.
fn sibling_qas(path: &Path) -> Result<Vec<QARecord>> {
    let text = path.to_string_lossy();
    let stem = text
        .strip_suffix(WORLD_SUFFIX)
        .map(str::to_owned)
        .unwrap_or_else(|| path.with_extension("").to_string_lossy().into_owned());
    let qa = PathBuf::from(format!("{stem}{QA_SUFFIX}"));
    if qa.exists() {
        Ok(load_qas(&qa)?)
    } else {
        Ok(Vec::new())
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn print_json(value: &serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("serializable")
    );
}

impl Ctx {
    fn open(&self, path: &Path) -> Result<Source> {
        if is_world(path) {
            return Ok(Source::Sim(load_world(path)?));
        }
        let source = path.to_string_lossy().into_owned();
        if !path.exists() {
            return Err(MediaError::Missing(source).into());
        }
        let duration = probe_duration(&self.config.probe, &source)?;
        Ok(Source::Media(VideoMeta::new(
            media_id(path),
            duration,
            source,
        )?))
    }

    fn scope(&self, duration_s: u64) -> Result<ScopeConfig> {
        self.config.scope(
            self.global.preset.as_deref(),
            self.global.max_iters,
            duration_s,
        )
    }

    fn cache(&self) -> MemoryCache {
        MemoryCache::new(&self.config.cache_dir)
    }

    fn reasoner(&self) -> Result<Box<dyn TextBackend>> {
        Ok(Box::new(HttpTextBackend::new(
            self.config.reasoner()?.http(),
        )?))
    }

    fn backends(
        &self,
        source: &Source,
        scope: &ScopeConfig,
    ) -> Result<(Box<dyn TextBackend>, Box<dyn CaptionBackend>)> {
        Ok(match source {
            Source::Sim(w) => (
                Box::new(ScriptedReasoner),
                Box::new(ScriptedCaptioner::new(w.clone(), scope.clone())),
            ),
            Source::Media(_) => {
                let frames = FrameExtractor::new(&self.config.decoder);
                (
                    self.reasoner()?,
                    Box::new(HttpCaptionBackend::new(
                        self.config.captioner()?.http(),
                        frames,
                    )?),
                )
            }
        })
    }

    /// Full loop for one question with caching and trace export.
    fn answer(&self, source: &Source, question: &str) -> Result<(FinalResponse, PathBuf)> {
        let meta = source.meta();
        let scope = self.scope(meta.duration_s)?;
        let (llm, captioner) = self.backends(source, &scope)?;
        let engine = Engine::new(scope, llm.as_ref(), captioner.as_ref())
            .with_options(self.config.engine_options())
            .with_cache(self.cache());
        let response = engine.run(&meta, question)?;
        let trace = write_trace(&self.config.trace_dir, &meta.video_id, question, &response)
            .with_context(|| format!("writing trace under {}", self.config.trace_dir.display()))?;
        Ok((response, trace))
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = Config::load(cli.global.config.as_deref())?;
    let ctx = Ctx {
        global: cli.global,
        config,
    };
    match cli.command {
        Command::Memorize { video } => memorize(&ctx, &video),
        Command::Ask { video, question } => ask(&ctx, &video, &question),
        Command::Eval {
            qa_file,
            videos,
            out,
            judge,
        } => eval(&ctx, &qa_file, &videos, &out, judge),
        Command::Curve {
            video,
            question,
            out,
        } => curve(&ctx, &video, &question, &out),
        Command::Simgen {
            seed,
            duration,
            facts,
            needle,
            id,
            out,
        } => simgen(&ctx, seed, duration, facts, needle, id, &out),
        Command::Needle {
            base,
            needles,
            positions,
            out,
        } => needle(&ctx, &base, &needles, &positions, &out),
    }
}

fn cached_coarse(ctx: &Ctx, meta: &VideoMeta, scope: &ScopeConfig) -> Result<usize> {
    let loaded = ctx.cache().load(&meta.video_id)?;
    let clips = divide(meta.duration_s, scope.t_coarse_s);
    Ok(clips
        .periods()
        .iter()
        .filter(|p| loaded.memory.get(p, MemoryLevel::Coarse).is_some())
        .count())
}

fn memorize(ctx: &Ctx, video: &Path) -> Result<()> {
    let source = ctx.open(video)?;
    let meta = source.meta();
    let scope = ctx.scope(meta.duration_s)?;
    let clips = divide(meta.duration_s, scope.t_coarse_s).len();
    if ctx.global.dry_run {
        let cached = cached_coarse(ctx, &meta, &scope)?;
        return report_plan(ctx, &meta, &scope, clips - cached, 0);
    }
    let (llm, captioner) = ctx.backends(&source, &scope)?;
    let engine = Engine::new(scope, llm.as_ref(), captioner.as_ref())
        .with_options(ctx.config.engine_options())
        .with_cache(ctx.cache());
    let mut state = LoopState::default();
    let memory = engine.build_coarse_memory(&meta, &mut state)?;
    let path = ctx.cache().path_for(&meta.video_id);
    let hit = state.ledger.caption_calls == 0;
    if ctx.global.json {
        print_json(&json!({
            "video_id": meta.video_id,
            "coarse_entries": memory.len(),
            "cache_hit": hit,
            "caption_calls": state.ledger.caption_calls,
            "cache_hits": state.ledger.cache_hits,
            "cache_file": path,
        }));
    } else if hit {
        println!(
            "cache hit: {} coarse entries in {}",
            memory.len(),
            path.display()
        );
    } else {
        println!(
            "captioned {} coarse clips ({} from cache) into {}",
            state.ledger.caption_calls,
            state.ledger.cache_hits,
            path.display()
        );
    }
    Ok(())
}

/// Worst-case backend calls for one question.
fn report_plan(
    ctx: &Ctx,
    meta: &VideoMeta,
    scope: &ScopeConfig,
    coarse_captions: usize,
    iterations: usize,
) -> Result<()> {
    let children = [
        scope.t_coarse_s.div_ceil(scope.t_fine_s),
        scope.t_fine_s.div_ceil(scope.t_ultrafine_s),
    ]
    .into_iter()
    .max()
    .unwrap_or(1) as usize;
    let step_captions = 1 + children;
    let caption_max = coarse_captions + iterations * step_captions;
    let logical = if iterations == 0 {
        0
    } else {
        reasoning_call_bound(iterations)
    };
    let physical = logical * (ctx.config.max_repairs + 1);
    if ctx.global.json {
        print_json(&json!({
            "video_id": meta.video_id,
            "duration_s": meta.duration_s,
            "scope": scope,
            "coarse_captions": coarse_captions,
            "captions_per_step_max": step_captions,
            "caption_calls_max": caption_max,
            "reasoning_logical_max": logical,
            "reasoning_physical_max": physical,
        }));
    } else {
        println!("video {} ({} s)", meta.video_id, meta.duration_s);
        println!(
            "scope T_c={} T_f={} T_uf={} s, max iterations {}",
            scope.t_coarse_s, scope.t_fine_s, scope.t_ultrafine_s, scope.max_iterations
        );
        println!("coarse captions: {coarse_captions}");
        if iterations > 0 {
            println!("captions per exploration step: at most {step_captions}");
            println!("caption calls: at most {caption_max}");
            println!("reasoning calls: at most {logical} ({physical} with repairs)");
        }
    }
    Ok(())
}

fn ask(ctx: &Ctx, video: &Path, question: &str) -> Result<()> {
    if question.trim().is_empty() {
        return Err(config_error("question is empty"));
    }
    let source = ctx.open(video)?;
    if ctx.global.dry_run {
        let meta = source.meta();
        let scope = ctx.scope(meta.duration_s)?;
        let clips = divide(meta.duration_s, scope.t_coarse_s).len();
        let cached = cached_coarse(ctx, &meta, &scope)?;
        return report_plan(ctx, &meta, &scope, clips - cached, scope.max_iterations);
    }
    let (r, trace) = ctx.answer(&source, question)?;
    if ctx.global.json {
        print_json(&json!({
            "video_id": source.meta().video_id,
            "answer": r.answer,
            "confident": r.confident,
            "forced": r.forced,
            "evidence_periods": r.evidence_periods,
            "reason": r.reason,
            "iterations_used": r.iterations_used,
            "relevant_periods": r.relevant_periods,
            "ledger": r.ledger,
            "trace": trace,
        }));
    } else {
        println!("answer: {}", r.answer);
        println!(
            "confident: {}{}",
            if r.confident { "yes" } else { "no" },
            if r.forced {
                " (forced final round)"
            } else {
                ""
            }
        );
        let evidence: Vec<String> = r.evidence_periods.iter().map(|p| p.to_string()).collect();
        println!(
            "evidence: {}",
            if evidence.is_empty() {
                "none".into()
            } else {
                evidence.join(", ")
            }
        );
        println!("iterations: {}", r.iterations_used);
        println!(
            "calls: {} reasoning ({} repairs), {} captions, {} cache hits",
            r.ledger.reasoning_logical,
            r.ledger.repair_calls,
            r.ledger.caption_calls,
            r.ledger.cache_hits
        );
        println!("trace: {}", trace.display());
    }
    Ok(())
}

/// Resolves QA video ids against a directory of worlds and media files.
struct DirPipeline<'a> {
    ctx: &'a Ctx,
    videos: PathBuf,
}

impl DirPipeline<'_> {
    fn locate(&self, video_id: &str) -> Option<PathBuf> {
        let world = self.videos.join(format!("{video_id}{WORLD_SUFFIX}"));
        if world.exists() {
            return Some(world);
        }
        MEDIA_EXTENSIONS
            .iter()
            .map(|ext| self.videos.join(format!("{video_id}.{ext}")))
            .find(|p| p.exists())
    }
}

impl Pipeline for DirPipeline<'_> {
    fn ask(&self, video_id: &str, question: &str) -> Result<FinalResponse, PipelineError> {
        let path = self
            .locate(video_id)
            .ok_or_else(|| PipelineError::MissingVideo(video_id.into()))?;
        let source = self
            .ctx
            .open(&path)
            .map_err(|e| PipelineError::Other(format!("{e:#}")))?;
        self.ctx
            .answer(&source, question)
            .map(|(r, _)| r)
            .map_err(|e| match e.downcast::<EngineError>() {
                Ok(engine) => PipelineError::Engine(engine),
                Err(other) => PipelineError::Other(format!("{other:#}")),
            })
    }
}

fn eval(ctx: &Ctx, qa_file: &Path, videos: &Path, out: &Path, judge: bool) -> Result<()> {
    let qas = load_qas(qa_file)?;
    let pipeline = DirPipeline {
        ctx,
        videos: videos.to_path_buf(),
    };
    let options = EvalOptions {
        strict: ctx.global.strict,
        workers: ctx.config.workers,
    };
    let judge_llm = if judge { Some(ctx.reasoner()?) } else { None };
    let judge_matcher = judge_llm.as_deref().map(|llm| JudgeMatcher { llm });
    let matcher: &dyn AnswerMatcher = match &judge_matcher {
        Some(m) => m,
        None => &FirstLabel,
    };
    let report = run_eval(&qas, &pipeline, matcher, options)?;
    let (json_path, csv_path) = report.write(out)?;
    if ctx.global.json {
        print_json(&json!({
            "records": report.records,
            "scored": report.scored,
            "correct": report.correct,
            "errors": report.errors,
            "accuracy": report.accuracy,
            "mean_llm_calls": report.mean_llm_calls,
            "max_llm_calls": report.max_llm_calls,
            "report_json": json_path,
            "report_csv": csv_path,
        }));
    } else {
        println!(
            "accuracy {:.4} ({}/{} scored, {} errors)",
            report.accuracy, report.correct, report.scored, report.errors
        );
        for (cat, s) in &report.per_category {
            println!("  {cat}: {:.4} ({}/{})", s.accuracy, s.correct, s.scored);
        }
        println!(
            "LLM calls per question: mean {:.2}, max {}",
            report.mean_llm_calls, report.max_llm_calls
        );
        println!("wrote {} and {}", json_path.display(), csv_path.display());
    }
    Ok(())
}

fn curve(ctx: &Ctx, video: &Path, question: &str, out: &Path) -> Result<()> {
    let source = ctx.open(video)?;
    let (r, _) = ctx.answer(&source, question)?;
    let along = if r.evidence_periods.is_empty() {
        r.relevant_periods.periods.iter().copied().collect()
    } else {
        r.evidence_periods.clone()
    };
    let snapshots = snapshot_along(&r.memory, &along);
    let llm: Box<dyn TextBackend> = match source {
        Source::Sim(_) => Box::new(ScriptedReasoner),
        Source::Media(_) => ctx.reasoner()?,
    };
    let rows =
        richness_relevance_curve(&snapshots, question, llm.as_ref(), ctx.config.max_repairs)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join("levels.csv");
    let csv = curve_csv(&rows);
    std::fs::write(&path, &csv).with_context(|| format!("writing {}", path.display()))?;
    if ctx.global.json {
        print_json(&json!({ "levels": rows, "levels_csv": path }));
    } else {
        print!("{csv}");
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn simgen(
    ctx: &Ctx,
    seed: u64,
    duration: u64,
    facts: usize,
    needle: Option<usize>,
    id: Option<String>,
    out: &Path,
) -> Result<()> {
    if duration == 0 {
        return Err(config_error("--duration must be positive"));
    }
    let id = id.unwrap_or_else(|| format!("sim-{seed}"));
    let mut lex = Lexicon::new(seed);
    let (world, qas) = match needle {
        Some(q) if q as u64 > duration => {
            return Err(config_error(format!(
                "{q} questions need at least {q} s of needle"
            )));
        }
        Some(q) => {
            let n = generate_needle(&mut lex, &id, duration, q);
            (n.world, n.qas)
        }
        None if facts == 0 => (generate_base(&mut lex, &id, duration), Vec::new()),
        None => {
            let scope = ctx.scope(duration)?;
            let p = generate_world(&mut lex, &id, duration, &scope, facts)?;
            (p.world, p.qas)
        }
    };
    let world_path = out.join(format!("{id}{WORLD_SUFFIX}"));
    let qa_path = out.join(format!("{id}{QA_SUFFIX}"));
    write_json(&world_path, &world)?;
    write_json(&qa_path, &qas)?;
    if ctx.global.json {
        print_json(&json!({ "world": world_path, "qa": qa_path, "questions": qas.len() }));
    } else {
        println!(
            "wrote {} ({} events) and {} ({} questions)",
            world_path.display(),
            world.events.len(),
            qa_path.display(),
            qas.len()
        );
    }
    Ok(())
}

fn needle(
    ctx: &Ctx,
    base: &Path,
    needles: &[PathBuf],
    positions: &[u64],
    out: &Path,
) -> Result<()> {
    if is_world(base) {
        let base_world = load_world(base)?;
        let base_qas = sibling_qas(base)?;
        let parts = needles
            .iter()
            .map(|p| {
                Ok(Needle {
                    world: load_world(p)?,
                    qas: sibling_qas(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let hay = build_needle_haystack(&base_world, &base_qas, &parts, positions)?;
        let world_path = out.join(format!("{}{WORLD_SUFFIX}", hay.world.video_id));
        let qa_path = out.join(format!("{}{QA_SUFFIX}", hay.world.video_id));
        write_json(&world_path, &hay.world)?;
        write_json(&qa_path, &hay.qas)?;
        if ctx.global.json {
            print_json(&json!({
                "world": world_path,
                "qa": qa_path,
                "duration_s": hay.world.duration_s,
                "needle_periods": hay.needle_periods,
            }));
        } else {
            println!(
                "spliced {} needles into {} s",
                needles.len(),
                hay.world.duration_s
            );
            println!("wrote {} and {}", world_path.display(), qa_path.display());
        }
        return Ok(());
    }

    let source = |p: &Path| -> Result<(String, u64)> {
        let s = p.to_string_lossy().into_owned();
        if !p.exists() {
            return Err(MediaError::Missing(s).into());
        }
        let d = probe_duration(&ctx.config.probe, &s)?;
        Ok((s, d))
    };
    let (base_source, base_duration) = source(base)?;
    let media = needles
        .iter()
        .map(|p| {
            let (s, d) = source(p)?;
            Ok(MediaNeedle {
                source: s,
                duration_s: d,
                qas: sibling_qas(p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let plan = plan_media_splice(
        &media_id(base),
        &base_source,
        base_duration,
        &sibling_qas(base)?,
        &media,
        positions,
    )?;
    let plan_path = out.join(format!("{}.splice.json", plan.video_id));
    let script_path = out.join(format!("{}.ffconcat", plan.video_id));
    let qa_path = out.join(format!("{}{QA_SUFFIX}", plan.video_id));
    write_json(&plan_path, &plan)?;
    std::fs::write(&script_path, plan.concat_script())
        .with_context(|| format!("writing {}", script_path.display()))?;
    write_json(&qa_path, &plan.qas)?;
    if ctx.global.json {
        print_json(&json!({
            "plan": plan_path,
            "concat_script": script_path,
            "qa": qa_path,
            "duration_s": plan.duration_s,
            "needle_periods": plan.needle_periods,
        }));
    } else {
        println!(
            "{} segments, {} s total",
            plan.segments.len(),
            plan.duration_s
        );
        println!(
            "wrote {}, {} and {}",
            plan_path.display(),
            script_path.display(),
            qa_path.display()
        );
    }
    Ok(())
}
