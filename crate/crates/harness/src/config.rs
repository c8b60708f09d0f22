//! Run configuration: one JSON document with a section per module type.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "source": { "kind": "twin_beam", "mean": 12.5, "modes": 100 },
//!   "detectors": ["25CS", { "n_cells": 667, "pde": 0.4, ... }],
//!   "pipeline": { "gate_len_ns": 10 },
//!   "waveform": { "noise_sigma": 1.0 },
//!   "events": 100000,
//!   "blocks": 4,
//!   "mode": "full-waveform",
//!   "jitter_ns": 0.0,
//!   "output": { "dir": "out" },
//!   "analysis": { "products": ["spectrum", "stats"] }
//! }
//! ```

use std::path::{Path, PathBuf};

use pnr_core::dsp_pipeline::PipelineConfig;
use pnr_core::photon_sources::LightStateSpec;
use pnr_core::quantum_stats::CalibrationMethod;
use pnr_core::sipm_model::{SiPMConfig, WaveformParams};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Fired-cell counts go straight to the statistics; no waveforms.
    #[default]
    CountsOnly,
    /// Every event is synthesized, digitized and run through the pipeline.
    FullWaveform,
}

/// A detector given by preset name or spelled out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DetectorSpec {
    Preset(String),
    Inline(SiPMConfig),
}

impl DetectorSpec {
    pub fn resolve(&self) -> Result<SiPMConfig> {
        let cfg = match self {
            Self::Preset(name) => SiPMConfig::preset(name)
                .ok_or_else(|| HarnessError::config(format!("unknown detector preset {name:?}")))?,
            Self::Inline(cfg) => *cfg,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Product {
    /// Histogram, fitted peaks, visibility, FoM and peak spacing per arm.
    Spectrum,
    /// Block estimates of mean, Fano, Γ and R.
    Stats,
    /// Fidelity of arm 1 to a Poisson law of the same mean.
    Fidelity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSpec {
    pub products: Vec<Product>,
    pub calibration: CalibrationMethod,
    /// Histogram bin width in charge units; chosen from the narrowest peak when absent.
    pub bin_width: Option<f64>,
    /// Smallest population a peak needs to enter the fit.
    pub min_peak_counts: u64,
    pub visibility_half_width: usize,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self {
            products: vec![Product::Spectrum, Product::Stats],
            calibration: CalibrationMethod::NearestPeak,
            bin_width: None,
            min_peak_counts: 100,
            visibility_half_width: 3,
        }
    }
}

impl AnalysisSpec {
    pub fn wants(&self, p: Product) -> bool {
        self.products.contains(&p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub dir: PathBuf,
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

fn default_events() -> u64 {
    100_000
}

fn default_blocks() -> usize {
    4
}

fn default_split() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub source: LightStateSpec,
    /// One or two detectors. A single-arm source feeding two detectors is
    /// split on a beam splitter of transmission `split_ratio`.
    pub detectors: Vec<DetectorSpec>,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub waveform: WaveformParams,
    #[serde(default = "default_events")]
    pub events: u64,
    #[serde(default = "default_blocks")]
    pub blocks: usize,
    #[serde(default)]
    pub mode: Mode,
    /// Overrides `waveform.jitter_ns` when present.
    #[serde(default)]
    pub jitter_ns: Option<f64>,
    #[serde(default = "default_split")]
    pub split_ratio: f64,
    /// Worker threads; the global pool when absent. Results do not depend on it.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub output: OutputPaths,
    #[serde(default)]
    pub analysis: AnalysisSpec,
}

impl RunConfig {
    pub fn new(source: LightStateSpec, detectors: Vec<SiPMConfig>) -> Self {
        Self {
            seed: 0,
            source,
            detectors: detectors.into_iter().map(DetectorSpec::Inline).collect(),
            pipeline: PipelineConfig::default(),
            waveform: WaveformParams::default(),
            events: default_events(),
            blocks: default_blocks(),
            mode: Mode::CountsOnly,
            jitter_ns: None,
            split_ratio: default_split(),
            workers: None,
            output: OutputPaths::default(),
            analysis: AnalysisSpec::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| HarnessError::Json { path: path.to_path_buf(), source })
    }

    /// Waveform parameters with the jitter override applied.
    pub fn waveform_params(&self) -> WaveformParams {
        WaveformParams { jitter_ns: self.jitter_ns.unwrap_or(self.waveform.jitter_ns), ..self.waveform }
    }

    pub fn validate(&self) -> Result<Resolved> {
        self.source.validate()?;
        if self.detectors.is_empty() || self.detectors.len() > 2 {
            return Err(HarnessError::config(format!("need one or two detectors, got {}", self.detectors.len())));
        }
        if self.source.is_two_arm() && self.detectors.len() != 2 {
            return Err(HarnessError::config("a twin-beam source needs two detectors"));
        }
        if self.events == 0 {
            return Err(HarnessError::config("events must be >= 1"));
        }
        if self.events > u32::MAX as u64 {
            return Err(HarnessError::config("events must fit a 32-bit event index"));
        }
        if self.blocks < 2 {
            return Err(HarnessError::config("blocks must be >= 2"));
        }
        if self.events < self.blocks as u64 {
            return Err(HarnessError::config(format!("{} events cannot fill {} blocks", self.events, self.blocks)));
        }
        if let Some(j) = self.jitter_ns {
            if !(j >= 0.0 && j.is_finite()) {
                return Err(HarnessError::config("jitter_ns must be finite and >= 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.split_ratio) {
            return Err(HarnessError::config("split_ratio must lie in [0, 1]"));
        }
        if self.workers == Some(0) {
            return Err(HarnessError::config("workers must be >= 1"));
        }
        if let Some(w) = self.analysis.bin_width {
            if !(w > 0.0 && w.is_finite()) {
                return Err(HarnessError::config("analysis.bin_width must be > 0"));
            }
        }
        self.pipeline.validate()?;
        self.waveform_params().validate()?;
        let detectors = self.detectors.iter().map(DetectorSpec::resolve).collect::<Result<Vec<_>>>()?;
        Ok(Resolved { detectors })
    }
}

/// Detector configurations after preset lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub detectors: Vec<SiPMConfig>,
}
