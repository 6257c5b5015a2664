//! Run configuration files.
//!
//! A config is one JSON document:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "n": 128,
//!   "algorithm": "alamm",
//!   "seed": 7,
//!   "zone": { "max_delay": 5, "doppler": { "unit": "bins", "lo": -2, "hi": 2, "count": 41 } },
//!   "mask": { "stopbands": [[0.1, 0.2]], "attenuation_db": 20, "n_f": 50 },
//!   "design": { "papr_bound": 1, "p": 22 },
//!   "out": "runs/alamm"
//! }
//! ```
//!
//! `zone.weights` (2r+1 values for k = -r..r) defaults to all ones,
//! `mask` may be omitted, and `design` accepts any [`DesignConfig`] field.

use std::fs;
use std::path::{Path, PathBuf};

use dopseq::{DesignConfig, SpectralMask, ZoneOfOperation};
use serde::Deserialize;

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Alamm,
    Am,
    Chirp,
    Polyphase,
    FilteredPolyphase,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Alamm => "alamm",
            Algorithm::Am => "am",
            Algorithm::Chirp => "chirp",
            Algorithm::Polyphase => "polyphase",
            Algorithm::FilteredPolyphase => "filtered-polyphase",
        }
    }
}

/// Starting point of the optimizers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    #[default]
    Polyphase,
    Chirp,
    FilteredPolyphase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DopplerUnit {
    /// `ν`, converted with `f = ν / N`.
    Bins,
    /// Cycles per sample.
    Cycles,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DopplerSpec {
    pub unit: DopplerUnit,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneSpec {
    pub max_delay: usize,
    pub doppler: DopplerSpec,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSpec {
    pub stopbands: Vec<(f64, f64)>,
    pub attenuation_db: f64,
    pub n_f: usize,
}

fn default_taps() -> usize {
    31
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub n: usize,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub zone: ZoneSpec,
    #[serde(default)]
    pub mask: Option<MaskSpec>,
    #[serde(default)]
    pub design: DesignConfig,
    #[serde(default)]
    pub init: Init,
    /// Odd FIR length for `filtered-polyphase`.
    #[serde(default = "default_taps")]
    pub filter_taps: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

/// Domain objects built from a validated [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Problem {
    pub zone: ZoneOfOperation,
    pub mask: SpectralMask,
    pub design: DesignConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Parses and validates. Syntax and type errors carry line and column;
    /// semantic errors name the offending field.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            CliError::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(field_err(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", cfg.schema_version),
            ));
        }
        if cfg.n < 2 {
            return Err(field_err("n", format!("sequence length must be at least 2, got {}", cfg.n)));
        }
        cfg.design.seed = cfg.seed;
        cfg.problem()?;
        Ok(cfg)
    }

    pub fn problem(&self) -> Result<Problem> {
        let n = self.n;
        let z = &self.zone;
        let scale = match z.doppler.unit {
            DopplerUnit::Bins => 1.0 / n as f64,
            DopplerUnit::Cycles => 1.0,
        };
        if z.doppler.count == 0 {
            return Err(field_err("zone.doppler.count", "must be positive".into()));
        }
        let doppler = dopseq::waveform::linspace(z.doppler.lo * scale, z.doppler.hi * scale, z.doppler.count);
        let weights = z.weights.clone().unwrap_or_else(|| vec![1.0; 2 * z.max_delay + 1]);
        let zone = ZoneOfOperation::new(z.max_delay, doppler, weights).map_err(|e| field_err("zone", e.to_string()))?;
        zone.check_length(n).map_err(|e| field_err("zone.max_delay", e.to_string()))?;
        let mask = match &self.mask {
            None => SpectralMask::none(n),
            Some(m) => SpectralMask::from_intervals(&m.stopbands, m.n_f, m.attenuation_db, n)
                .map_err(|e| field_err("mask", e.to_string()))?,
        };
        self.design.validate(n).map_err(|e| field_err("design", e.to_string()))?;
        if self.algorithm == Algorithm::Am && n > dopseq::amsdr::MAX_REFERENCE_DIM {
            return Err(field_err(
                "n",
                format!("algorithm am is limited to N <= {}", dopseq::amsdr::MAX_REFERENCE_DIM),
            ));
        }
        let filtered = self.algorithm == Algorithm::FilteredPolyphase || self.init == Init::FilteredPolyphase;
        if filtered {
            if self.filter_taps % 2 == 0 || self.filter_taps >= n {
                return Err(field_err(
                    "filter_taps",
                    format!("must be odd and below N = {n}, got {}", self.filter_taps),
                ));
            }
            if mask.is_empty() {
                return Err(field_err("mask", "filtered-polyphase needs a stopband".into()));
            }
        }
        Ok(Problem {
            zone,
            mask,
            design: self.design.clone(),
        })
    }
}

fn field_err(field: &str, msg: String) -> CliError {
    CliError::Config(format!("field `{field}`: {msg}"))
}
