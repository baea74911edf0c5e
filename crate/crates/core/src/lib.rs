//! Long-video question answering over a hierarchical temporal memory.
//!
//! A video is captioned coarsely, a localization agent narrows the memory to
//! the question-relevant periods, and an iterative loop descends into finer
//! captions until the answering agent is confident.

pub mod config;
pub mod engine;
pub mod eval;
pub mod media;
pub mod memory;
pub mod pool;
pub mod protocol;
pub mod sim;

pub use config::{Fps, LevelFps, Preset, ScopeConfig};
pub use memory::{ClipDivision, MemoryEntry, MemoryLevel, MemoryList, TimePeriod, VideoMeta};
