use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use lucy_core::config::{find_preset, select_split};
use lucy_core::engine::EngineOptions;
use lucy_core::protocol::http::HttpConfig;
use lucy_core::protocol::DEFAULT_MAX_REPAIRS;
use lucy_core::ScopeConfig;
use serde::Deserialize;

/// Problems with the configuration or the command line; exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endpoint {
    pub base_url: String,
    pub model: String,
    /// Used only when `LUCY_API_KEY` is unset.
    pub api_key: Option<String>,
    pub timeout_s: Option<u64>,
    pub max_retries: Option<u32>,
}

impl Endpoint {
    pub fn http(&self) -> HttpConfig {
        let mut c = HttpConfig::new(&self.base_url, &self.model);
        if c.api_key.is_none() {
            c.api_key = self.api_key.clone();
        }
        if let Some(t) = self.timeout_s {
            c.timeout = Duration::from_secs(t);
        }
        if let Some(r) = self.max_retries {
            c.max_retries = r;
        }
        c
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Preset used when `--preset` is absent.
    pub preset: Option<String>,
    /// Benchmark whose length-based split is picked when no preset is named.
    pub benchmark: String,
    pub workers: usize,
    pub context_budget_chars: usize,
    pub max_repairs: usize,
    pub cache_dir: PathBuf,
    pub trace_dir: PathBuf,
    pub decoder: PathBuf,
    pub probe: PathBuf,
    pub reasoner: Option<Endpoint>,
    pub captioner: Option<Endpoint>,
    /// Extra or overriding scope presets.
    pub presets: BTreeMap<String, ScopeConfig>,
}

impl Default for Config {
    fn default() -> Self {
        let engine = EngineOptions::default();
        Self {
            preset: None,
            benchmark: "mlvu".into(),
            workers: engine.workers,
            context_budget_chars: engine.context_budget_chars,
            max_repairs: DEFAULT_MAX_REPAIRS,
            cache_dir: PathBuf::from(".lucy/cache"),
            trace_dir: PathBuf::from(".lucy/traces"),
            decoder: PathBuf::from("ffmpeg"),
            probe: PathBuf::from("ffprobe"),
            reasoner: None,
            captioner: None,
            presets: BTreeMap::new(),
        }
    }
}

pub const DEFAULT_CONFIG: &str = "lucy.toml";

impl Config {
    /// An explicit path must exist; otherwise `lucy.toml` is read if present.
    pub fn load(explicit: Option<&Path>) -> anyhow::Result<Self> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None if Path::new(DEFAULT_CONFIG).exists() => PathBuf::from(DEFAULT_CONFIG),
            None => return Ok(Self::default()),
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Config = toml::from_str(&text)
            .map_err(|e| config_error(format!("invalid config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> anyhow::Result<()> {
        if self.workers == 0 {
            return Err(config_error("workers must be positive"));
        }
        for (name, scope) in &self.presets {
            scope
                .validate()
                .map_err(|e| config_error(format!("preset {name}: {e}")))?;
        }
        Ok(())
    }

    pub fn engine_options(&self) -> EngineOptions {
        EngineOptions {
            workers: self.workers,
            context_budget_chars: self.context_budget_chars,
            max_repairs: self.max_repairs,
            ..EngineOptions::default()
        }
    }

    fn named_preset(&self, name: &str) -> Option<ScopeConfig> {
        self.presets
            .get(name)
            .cloned()
            .or_else(|| find_preset(name).map(|p| p.scope))
    }

    /// `--preset`, then the configured preset, then the benchmark split for
    /// the video length. `max_iters` overrides whichever wins.
    pub fn scope(
        &self,
        preset: Option<&str>,
        max_iters: Option<usize>,
        duration_s: u64,
    ) -> anyhow::Result<ScopeConfig> {
        let scope = match preset.or(self.preset.as_deref()) {
            Some(name) => self
                .named_preset(name)
                .ok_or_else(|| config_error(format!("unknown preset {name:?}")))?,
            None => select_split(&self.benchmark, duration_s)
                .map(|p| p.scope)
                .ok_or_else(|| {
                    config_error(format!(
                        "no {} split covers {duration_s} s; pass --preset",
                        self.benchmark
                    ))
                })?,
        };
        match max_iters {
            Some(0) => Err(config_error("--max-iters must be positive")),
            Some(n) => Ok(scope.with_max_iterations(n)),
            None => Ok(scope),
        }
    }

    pub fn reasoner(&self) -> anyhow::Result<&Endpoint> {
        self.reasoner
            .as_ref()
            .ok_or_else(|| config_error("no [reasoner] endpoint configured"))
    }

    pub fn captioner(&self) -> anyhow::Result<&Endpoint> {
        self.captioner
            .as_ref()
            .ok_or_else(|| config_error("no [captioner] endpoint configured"))
    }
}
