//! Temporal scopes, per-level frame rates and the shipped benchmark presets.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::memory::{MemoryError, MemoryLevel};

/// Positive frame rate, kept exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fps(Ratio<u32>);

impl Fps {
    pub fn new(numer: u32, denom: u32) -> Result<Self, MemoryError> {
        if numer == 0 || denom == 0 {
            return Err(MemoryError::InvalidScope(format!(
                "fps {numer}/{denom} must be positive"
            )));
        }
        Ok(Fps(Ratio::new(numer, denom)))
    }

    pub fn whole(n: u32) -> Self {
        Fps(Ratio::from_integer(n.max(1)))
    }

    pub fn ratio(&self) -> Ratio<u32> {
        self.0
    }

    pub fn as_f64(&self) -> f64 {
        f64::from(*self.0.numer()) / f64::from(*self.0.denom())
    }

    /// `floor(duration_s * fps)`.
    pub fn frames_in(&self, duration_s: u64) -> u64 {
        duration_s * u64::from(*self.0.numer()) / u64::from(*self.0.denom())
    }
}

impl fmt::Display for Fps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (n, mut d) = (*self.0.numer(), *self.0.denom());
        if d == 1 {
            return write!(f, "{n}");
        }
        // Terminating decimals print as decimals, everything else as n/d.
        let (mut twos, mut fives) = (0u32, 0u32);
        while d % 2 == 0 {
            d /= 2;
            twos += 1;
        }
        while d % 5 == 0 {
            d /= 5;
            fives += 1;
        }
        if d != 1 {
            return write!(f, "{}/{}", n, self.0.denom());
        }
        let digits = twos.max(fives) as usize;
        write!(f, "{:.*}", digits, self.as_f64())
    }
}

impl FromStr for Fps {
    type Err = MemoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MemoryError::InvalidScope(format!("unparseable fps {s:?}"));
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n = n.trim().parse().map_err(|_| bad())?;
            let d = d.trim().parse().map_err(|_| bad())?;
            return Fps::new(n, d);
        }
        match s.split_once('.') {
            None => Fps::new(s.parse().map_err(|_| bad())?, 1),
            Some((int, frac)) => {
                if frac.len() > 6 || !frac.chars().all(|c| c.is_ascii_digit()) {
                    return Err(bad());
                }
                let denom = 10u32.pow(frac.len() as u32);
                let int: u32 = if int.is_empty() {
                    0
                } else {
                    int.parse().map_err(|_| bad())?
                };
                let frac_v: u32 = if frac.is_empty() {
                    0
                } else {
                    frac.parse().map_err(|_| bad())?
                };
                Fps::new(int * denom + frac_v, denom)
            }
        }
    }
}

impl Serialize for Fps {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Fps {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(u32),
            Float(f64),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Text(t) => t,
            Raw::Int(i) => i.to_string(),
            Raw::Float(f) => format!("{f}"),
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelFps {
    pub coarse: Fps,
    pub fine: Fps,
    pub ultra_fine: Fps,
}

impl LevelFps {
    pub fn get(&self, level: MemoryLevel) -> Fps {
        match level {
            MemoryLevel::Coarse => self.coarse,
            MemoryLevel::Fine => self.fine,
            MemoryLevel::UltraFine => self.ultra_fine,
        }
    }
}

fn default_init_relevant_count() -> usize {
    3
}

fn default_max_iterations() -> usize {
    5
}

/// Temporal scopes `T_c > T_f >= T_uf >= 1` plus loop limits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeConfig {
    pub t_coarse_s: u64,
    pub t_fine_s: u64,
    pub t_ultrafine_s: u64,
    pub fps: LevelFps,
    #[serde(default = "default_init_relevant_count")]
    pub init_relevant_count: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

impl ScopeConfig {
    pub fn new(
        t_coarse_s: u64,
        t_fine_s: u64,
        t_ultrafine_s: u64,
        fps: LevelFps,
    ) -> Result<Self, MemoryError> {
        let cfg = ScopeConfig {
            t_coarse_s,
            t_fine_s,
            t_ultrafine_s,
            fps,
            init_relevant_count: default_init_relevant_count(),
            max_iterations: default_max_iterations(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), MemoryError> {
        if !(self.t_coarse_s > self.t_fine_s
            && self.t_fine_s >= self.t_ultrafine_s
            && self.t_ultrafine_s >= 1)
        {
            return Err(MemoryError::InvalidScope(format!(
                "scopes must satisfy T_c > T_f >= T_uf >= 1, got {}/{}/{}",
                self.t_coarse_s, self.t_fine_s, self.t_ultrafine_s
            )));
        }
        if self.init_relevant_count == 0 || self.max_iterations == 0 {
            return Err(MemoryError::InvalidScope(
                "init_relevant_count and max_iterations must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn scope_s(&self, level: MemoryLevel) -> u64 {
        match level {
            MemoryLevel::Coarse => self.t_coarse_s,
            MemoryLevel::Fine => self.t_fine_s,
            MemoryLevel::UltraFine => self.t_ultrafine_s,
        }
    }

    pub fn fps_for(&self, level: MemoryLevel) -> Fps {
        self.fps.get(level)
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub benchmark: &'static str,
    /// Inclusive lower / exclusive upper bound on video length for this split.
    pub min_duration_s: Option<u64>,
    pub max_duration_s: Option<u64>,
    pub scope: ScopeConfig,
}

fn preset(
    name: &'static str,
    benchmark: &'static str,
    range: (Option<u64>, Option<u64>),
    scopes: (u64, u64, u64),
    fps: (Fps, Fps, Fps),
) -> Preset {
    Preset {
        name,
        benchmark,
        min_duration_s: range.0,
        max_duration_s: range.1,
        scope: ScopeConfig {
            t_coarse_s: scopes.0,
            t_fine_s: scopes.1,
            t_ultrafine_s: scopes.2,
            fps: LevelFps {
                coarse: fps.0,
                fine: fps.1,
                ultra_fine: fps.2,
            },
            init_relevant_count: 3,
            max_iterations: 5,
        },
    }
}

/// Every shipped preset, in table order.
pub fn presets() -> Vec<Preset> {
    let f = Fps::whole;
    let q = |n, d| Fps(Ratio::new(n, d));
    let std_rates = (f(1), f(2), f(2));
    vec![
        preset(
            "mlvu-short",
            "mlvu",
            (Some(0), Some(600)),
            (30, 5, 1),
            std_rates,
        ),
        preset(
            "mlvu-medium",
            "mlvu",
            (Some(600), Some(1200)),
            (60, 5, 1),
            std_rates,
        ),
        preset(
            "mlvu-long",
            "mlvu",
            (Some(1200), Some(3600)),
            (100, 10, 1),
            std_rates,
        ),
        preset(
            "mlvu-extra-long",
            "mlvu",
            (Some(3600), None),
            (200, 10, 1),
            std_rates,
        ),
        preset(
            "videomme-short",
            "videomme",
            (None, None),
            (5, 1, 1),
            (f(2), f(4), f(4)),
        ),
        preset(
            "videomme-medium",
            "videomme",
            (None, None),
            (50, 5, 1),
            std_rates,
        ),
        preset(
            "videomme-long",
            "videomme",
            (None, None),
            (100, 10, 1),
            std_rates,
        ),
        preset(
            "lvbench-short",
            "lvbench",
            (Some(1800), Some(3600)),
            (100, 10, 1),
            std_rates,
        ),
        preset(
            "lvbench-medium",
            "lvbench",
            (Some(3600), Some(5400)),
            (150, 10, 1),
            std_rates,
        ),
        preset(
            "lvbench-long",
            "lvbench",
            (Some(5400), None),
            (200, 10, 1),
            std_rates,
        ),
        preset(
            "egomem",
            "egomem",
            (None, None),
            (800, 80, 8),
            (q(1, 4), q(1, 2), f(1)),
        ),
    ]
}

pub fn find_preset(name: &str) -> Option<Preset> {
    presets().into_iter().find(|p| p.name == name)
}

/// Pick the length-based split of a benchmark for a video. Video-MME splits
/// are assigned by its authors, so they are never chosen by length.
pub fn select_split(benchmark: &str, duration_s: u64) -> Option<Preset> {
    presets().into_iter().find(|p| {
        p.benchmark == benchmark
            && p.min_duration_s.is_some_and(|lo| duration_s >= lo)
            && p.max_duration_s.is_none_or(|hi| duration_s < hi)
    })
}

/// Preset table as CSV: `name,t_coarse_s,t_fine_s,t_ultrafine_s,fps_coarse,fps_fine,fps_ultrafine`.
pub fn preset_table_csv() -> String {
    let mut out =
        String::from("name,t_coarse_s,t_fine_s,t_ultrafine_s,fps_coarse,fps_fine,fps_ultrafine\n");
    for p in presets() {
        let s = &p.scope;
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.name,
            s.t_coarse_s,
            s.t_fine_s,
            s.t_ultrafine_s,
            s.fps.coarse,
            s.fps.fine,
            s.fps.ultra_fine
        ));
    }
    out
}
