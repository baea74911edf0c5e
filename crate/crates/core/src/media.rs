//! Frame extraction through an external decoder, and the per-video memory
//! cache (`<video_id>.memory.jsonl`).

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Arc, Mutex, OnceLock};

use image::codecs::jpeg::JpegEncoder;
use image::imageops::FilterType;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Fps;
use crate::memory::{MemoryEntry, MemoryLevel, MemoryList, TimePeriod, VideoMeta};

#[derive(Debug, Error)]
pub enum MediaError {
    #[error("source {0} does not exist")]
    Missing(String),
    #[error("period {period} lies outside the {duration_s} s video")]
    OutOfBounds { period: TimePeriod, duration_s: u64 },
    #[error("decoder tool {tool} failed ({status}): {stderr}")]
    Tool {
        tool: String,
        status: String,
        stderr: String,
    },
    #[error("decoder produced no frames: {stderr}")]
    NoFrames { stderr: String },
    #[error("frame decode failed: {0}")]
    Image(#[from] image::ImageError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("could not probe duration of {path}: {reason}")]
    Probe { path: String, reason: String },
}

/// Exact sample times for `period` at `fps`: `max(1, floor(duration * fps))`
/// frames spaced `1/fps` apart starting half a spacing in. A clip too short
/// for one full spacing gets a single frame at its midpoint.
pub fn sample_times(period: TimePeriod, fps: Fps) -> Vec<Ratio<u64>> {
    let start = Ratio::from_integer(period.start_s());
    let count = fps.frames_in(period.duration_s());
    if count == 0 {
        return vec![start + Ratio::new(period.duration_s(), 2)];
    }
    let (num, den) = (
        u64::from(*fps.ratio().numer()),
        u64::from(*fps.ratio().denom()),
    );
    (0..count)
        .map(|i| start + Ratio::new((2 * i + 1) * den, 2 * num))
        .collect()
}

fn ratio_secs(r: Ratio<u64>) -> String {
    format!("{:.6}", *r.numer() as f64 / *r.denom() as f64)
}

/// Encoded frames and their exact timestamps.
#[derive(Debug, Clone)]
pub struct FrameSet {
    pub frames: Vec<Vec<u8>>,
    pub timestamps_s: Vec<Ratio<u64>>,
}

/// Drives an ffmpeg-compatible decoder to pull JPEG frames out of a clip.
#[derive(Debug, Clone)]
pub struct FrameExtractor {
    pub tool: PathBuf,
    pub max_side: u32,
    pub jpeg_quality: u8,
}

impl Default for FrameExtractor {
    fn default() -> Self {
        Self {
            tool: PathBuf::from("ffmpeg"),
            max_side: 768,
            jpeg_quality: 85,
        }
    }
}

fn is_local(uri: &str) -> bool {
    !uri.contains("://") || uri.starts_with("file://")
}

impl FrameExtractor {
    pub fn new(tool: impl Into<PathBuf>) -> Self {
        Self {
            tool: tool.into(),
            ..Self::default()
        }
    }

    /// Decoder arguments for one clip; frames are written as numbered PPMs.
    pub fn command_args(
        &self,
        source: &str,
        period: TimePeriod,
        fps: Fps,
        out_dir: &Path,
    ) -> Vec<String> {
        let times = sample_times(period, fps);
        let first = times[0];
        let span = Ratio::from_integer(period.end_s()) - first;
        let rate = fps.ratio();
        vec![
            "-hide_banner".into(),
            "-loglevel".into(),
            "error".into(),
            "-ss".into(),
            ratio_secs(first),
            "-i".into(),
            source.trim_start_matches("file://").into(),
            "-t".into(),
            ratio_secs(span),
            "-vf".into(),
            format!(
                "fps={}/{},scale='min({m},iw)':'min({m},ih)':force_original_aspect_ratio=decrease",
                rate.numer(),
                rate.denom(),
                m = self.max_side
            ),
            "-frames:v".into(),
            times.len().to_string(),
            "-y".into(),
            out_dir
                .join("frame_%06d.ppm")
                .to_string_lossy()
                .into_owned(),
        ]
    }

    pub fn extract_frames(
        &self,
        video: &VideoMeta,
        period: TimePeriod,
        fps: Fps,
    ) -> Result<FrameSet, MediaError> {
        if period.end_s() > video.duration_s {
            return Err(MediaError::OutOfBounds {
                period,
                duration_s: video.duration_s,
            });
        }
        if is_local(&video.source_uri)
            && !Path::new(video.source_uri.trim_start_matches("file://")).exists()
        {
            return Err(MediaError::Missing(video.source_uri.clone()));
        }
        let dir = tempfile::tempdir()?;
        let output = Command::new(&self.tool)
            .args(self.command_args(&video.source_uri, period, fps, dir.path()))
            .output()
            .map_err(|e| MediaError::Tool {
                tool: self.tool.display().to_string(),
                status: "spawn failed".into(),
                stderr: e.to_string(),
            })?;
        let stderr = String::from_utf8_lossy(&output.stderr).into_owned();
        if !output.status.success() {
            return Err(MediaError::Tool {
                tool: self.tool.display().to_string(),
                status: output.status.to_string(),
                stderr,
            });
        }
        let mut files: Vec<PathBuf> = fs::read_dir(dir.path())?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "ppm"))
            .collect();
        files.sort();

        let mut timestamps = sample_times(period, fps);
        files.truncate(timestamps.len());
        if files.is_empty() {
            return Err(MediaError::NoFrames { stderr });
        }
        if files.len() < timestamps.len() {
            log::warn!(
                "decoder produced {} of {} frames for {period}",
                files.len(),
                timestamps.len()
            );
            timestamps.truncate(files.len());
        }
        let frames = files
            .iter()
            .map(|f| self.encode(f))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FrameSet {
            frames,
            timestamps_s: timestamps,
        })
    }

    fn encode(&self, path: &Path) -> Result<Vec<u8>, MediaError> {
        let mut img = image::load_from_memory(&fs::read(path)?)?;
        if img.width().max(img.height()) > self.max_side {
            img = img.resize(self.max_side, self.max_side, FilterType::Triangle);
        }
        let mut buf = Vec::new();
        JpegEncoder::new_with_quality(&mut buf, self.jpeg_quality).encode_image(&img.to_rgb8())?;
        Ok(buf)
    }
}

/// Duration in whole seconds (rounded up) via an ffprobe-compatible tool.
pub fn probe_duration(tool: &Path, source: &str) -> Result<u64, MediaError> {
    let probe_err = |reason: String| MediaError::Probe {
        path: source.into(),
        reason,
    };
    let out = Command::new(tool)
        .args([
            "-v",
            "error",
            "-show_entries",
            "format=duration",
            "-of",
            "csv=p=0",
            source,
        ])
        .output()
        .map_err(|e| probe_err(e.to_string()))?;
    if !out.status.success() {
        return Err(probe_err(String::from_utf8_lossy(&out.stderr).into_owned()));
    }
    let text = String::from_utf8_lossy(&out.stdout);
    let secs: f64 = text
        .trim()
        .parse()
        .map_err(|_| probe_err(format!("unparseable output {text:?}")))?;
    if secs.is_nan() || secs <= 0.0 {
        return Err(probe_err(format!("non-positive duration {secs}")));
    }
    Ok(secs.ceil() as u64)
}

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("cache serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// One line of a memory cache file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub video_id: String,
    pub start_s: u64,
    pub end_s: u64,
    pub level: MemoryLevel,
    pub text: String,
    pub instruction: String,
    pub revision: u32,
}

#[derive(Debug, Default)]
pub struct CacheLoad {
    pub memory: MemoryList,
    pub warnings: Vec<String>,
}

/// Directory of `<video_id>.memory.jsonl` files.
#[derive(Debug, Clone)]
pub struct MemoryCache {
    dir: PathBuf,
}

fn store_lock(path: &Path) -> Arc<Mutex<()>> {
    static LOCKS: OnceLock<Mutex<HashMap<PathBuf, Arc<Mutex<()>>>>> = OnceLock::new();
    let mut map = LOCKS
        .get_or_init(Default::default)
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    map.entry(path.to_path_buf()).or_default().clone()
}

impl MemoryCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, video_id: &str) -> PathBuf {
        let safe: String = video_id
            .chars()
            .map(|c| if matches!(c, '/' | '\\') { '_' } else { c })
            .collect();
        self.dir.join(format!("{safe}.memory.jsonl"))
    }

    /// Missing file → empty list. Malformed lines are skipped and reported.
    pub fn load(&self, video_id: &str) -> Result<CacheLoad, CacheError> {
        let path = self.path_for(video_id);
        let file = match fs::File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(CacheLoad::default()),
            Err(e) => return Err(e.into()),
        };
        let mut out = CacheLoad::default();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed = serde_json::from_str::<CacheRecord>(&line)
                .map_err(|e| e.to_string())
                .and_then(|r| record_to_entry(r, video_id));
            match parsed {
                Ok(entry) => out.memory.insert_raw(entry),
                Err(reason) => {
                    let msg = format!(
                        "{}:{}: skipped malformed record: {reason}",
                        path.display(),
                        lineno + 1
                    );
                    log::warn!("{msg}");
                    out.warnings.push(msg);
                }
            }
        }
        Ok(out)
    }

    /// Atomically replace the cache file for `video_id`.
    pub fn store(&self, video_id: &str, cm: &MemoryList) -> Result<(), CacheError> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path_for(video_id);
        let lock = store_lock(&path);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        for e in cm {
            let rec = CacheRecord {
                video_id: video_id.to_owned(),
                start_s: e.period.start_s(),
                end_s: e.period.end_s(),
                level: e.level,
                text: e.text.clone(),
                instruction: e.instruction.clone(),
                revision: e.revision,
            };
            serde_json::to_writer(&mut tmp, &rec)?;
            tmp.write_all(b"\n")?;
        }
        tmp.flush()?;
        tmp.persist(&path).map_err(|e| CacheError::Io(e.error))?;
        Ok(())
    }
}

fn record_to_entry(r: CacheRecord, video_id: &str) -> Result<MemoryEntry, String> {
    if r.video_id != video_id {
        return Err(format!("record belongs to video {:?}", r.video_id));
    }
    let period = TimePeriod::new(r.start_s, r.end_s).map_err(|e| e.to_string())?;
    if r.text.is_empty() {
        return Err("empty caption text".into());
    }
    Ok(MemoryEntry {
        period,
        level: r.level,
        text: r.text,
        instruction: r.instruction,
        revision: r.revision,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(a: u64, b: u64) -> TimePeriod {
        TimePeriod::new(a, b).unwrap()
    }

    #[test]
    fn sample_counts() {
        assert_eq!(sample_times(p(0, 200), Fps::whole(1)).len(), 200);
        assert_eq!(sample_times(p(0, 10), Fps::whole(2)).len(), 20);
        let one = sample_times(p(7, 8), Fps::new(1, 4).unwrap());
        assert_eq!(one, vec![Ratio::new(15, 2)]);
    }

    #[test]
    fn sample_phase_is_midpoint() {
        let t = sample_times(p(10, 12), Fps::whole(2));
        let expected: Vec<_> = [41u64, 43, 45, 47]
            .iter()
            .map(|n| Ratio::new(*n, 4))
            .collect();
        assert_eq!(t, expected);
    }

    #[test]
    fn args_follow_reference_invocation() {
        let fx = FrameExtractor::new("ffmpeg");
        let args = fx.command_args("/v.mp4", p(100, 110), Fps::whole(2), Path::new("/tmp/x"));
        let pos = |flag: &str| args.iter().position(|a| a == flag).unwrap();
        assert_eq!(args[pos("-ss") + 1], "100.250000");
        assert_eq!(args[pos("-t") + 1], "9.750000");
        assert!(args[pos("-vf") + 1].starts_with("fps=2/1,scale="));
        assert_eq!(args[pos("-frames:v") + 1], "20");
    }

    #[test]
    fn missing_source_is_media_error() {
        let video = VideoMeta::new("v", 100, "/definitely/not/here.mp4").unwrap();
        let err = FrameExtractor::default()
            .extract_frames(&video, p(0, 10), Fps::whole(1))
            .unwrap_err();
        assert!(matches!(err, MediaError::Missing(_)));
        let err = FrameExtractor::default()
            .extract_frames(&video, p(90, 110), Fps::whole(1))
            .unwrap_err();
        assert!(matches!(err, MediaError::OutOfBounds { .. }));
    }

    fn sample_list() -> MemoryList {
        let mut cm = MemoryList::new();
        for i in 0..10u64 {
            cm.upsert(MemoryEntry::new(
                p(i * 10, i * 10 + 10),
                MemoryLevel::Coarse,
                format!("clip {i}"),
                "describe",
            ));
        }
        cm.upsert(MemoryEntry::new(
            p(0, 10),
            MemoryLevel::Coarse,
            "again",
            "focus",
        ));
        cm
    }

    #[test]
    fn cache_round_trip_and_absent_file() {
        let dir = tempfile::tempdir().unwrap();
        let cache = MemoryCache::new(dir.path());
        assert!(cache.load("nothing").unwrap().memory.is_empty());
        let cm = sample_list();
        cache.store("vid", &cm).unwrap();
        let loaded = cache.load("vid").unwrap();
        assert_eq!(loaded.memory, cm);
        assert!(loaded.warnings.is_empty());
        assert!(dir.path().join("vid.memory.jsonl").exists());
    }

    #[test]
    fn corrupt_line_is_skipped_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        let cache = MemoryCache::new(dir.path());
        cache.store("vid", &sample_list()).unwrap();
        let path = cache.path_for("vid");
        let text = fs::read_to_string(&path).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[4] = "{\"video_id\": \"vid\", \"start_s\": 9";
        fs::write(&path, lines.join("\n")).unwrap();
        let loaded = cache.load("vid").unwrap();
        assert_eq!(loaded.memory.len(), 9);
        assert_eq!(loaded.warnings.len(), 1);
    }
}
