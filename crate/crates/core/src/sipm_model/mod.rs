//! SiPM response: photon detection efficiency, pile-up on a finite cell
//! array, optical cross-talk and dark counts, followed by waveform synthesis.

mod pnrw;
mod waveform;

pub use pnrw::{read_pnrw, write_pnrw, PnrwHeader, PnrwReader, PnrwWriter, PNRW_MAGIC, PNRW_VERSION};
pub use waveform::{
    analog_trace, quantize, synthesize_waveform, Waveform, WaveformParams, ADC_MAX, ADC_MIN,
    SAMPLE_PERIOD_NS,
};

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::photon_sources::sample_coherent;

/// Datasheet row for one of the characterised sensors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorDatasheet {
    pub name: &'static str,
    pub model: &'static str,
    pub sensor_mm: (f64, f64),
    pub pixel_pitch_um: f64,
    pub n_pixels: u64,
    pub peak_qe: f64,
    pub peak_wavelength_nm: f64,
    pub bias_v: f64,
    pub overvoltage_v: f64,
    pub dark_rate_khz: f64,
    pub crosstalk_pct: f64,
    pub gain: f64,
}

pub const DATASHEETS: [SensorDatasheet; 3] = [
    SensorDatasheet {
        name: "25CS",
        model: "S13360-1325CS",
        sensor_mm: (1.3, 1.3),
        pixel_pitch_um: 25.0,
        n_pixels: 2668,
        peak_qe: 0.25,
        peak_wavelength_nm: 450.0,
        bias_v: 56.0,
        overvoltage_v: 4.5,
        dark_rate_khz: 70.0,
        crosstalk_pct: 1.0,
        gain: 7.0e5,
    },
    SensorDatasheet {
        name: "50CS",
        model: "S13360-1350CS",
        sensor_mm: (1.3, 1.3),
        pixel_pitch_um: 50.0,
        n_pixels: 667,
        peak_qe: 0.40,
        peak_wavelength_nm: 450.0,
        bias_v: 56.0,
        overvoltage_v: 3.0,
        dark_rate_khz: 90.0,
        crosstalk_pct: 3.0,
        gain: 1.7e6,
    },
    SensorDatasheet {
        name: "25PS",
        model: "S15639-1325PS",
        sensor_mm: (1.3, 1.1),
        pixel_pitch_um: 25.0,
        n_pixels: 2120,
        peak_qe: 0.30,
        peak_wavelength_nm: 660.0,
        bias_v: 54.9,
        overvoltage_v: 10.0,
        dark_rate_khz: 700.0,
        crosstalk_pct: 4.0,
        gain: 1.3e6,
    },
];

/// ADC units per fired cell per unit of avalanche gain.
pub const ADU_PER_GAIN: f64 = 1.0e-4;

/// Default exponential decay of the amplified pulse, ns.
pub const DEFAULT_PULSE_TAU_NS: f64 = 20.0;

fn zero() -> f64 {
    0.0
}

/// Detector physics parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiPMConfig {
    pub n_cells: u64,
    /// Photon detection efficiency η.
    pub pde: f64,
    pub crosstalk_prob: f64,
    /// Dark count rate, Hz.
    pub dark_rate: f64,
    /// Electrons per avalanche (informational).
    pub gain: f64,
    /// Pulse decay constant, ns.
    pub pulse_tau: f64,
    /// ADC units per fired cell at pulse onset.
    pub cell_amplitude: f64,
    /// Relative cell-to-cell spread of the single-avalanche amplitude.
    #[serde(default = "zero")]
    pub gain_spread: f64,
    /// Relative event-to-event fluctuation of the common gain (bias ripple).
    #[serde(default = "zero")]
    pub gain_drift: f64,
}

impl SiPMConfig {
    pub fn from_datasheet(ds: &SensorDatasheet) -> Self {
        Self {
            n_cells: ds.n_pixels,
            pde: ds.peak_qe,
            crosstalk_prob: ds.crosstalk_pct / 100.0,
            dark_rate: ds.dark_rate_khz * 1e3,
            gain: ds.gain,
            pulse_tau: DEFAULT_PULSE_TAU_NS,
            cell_amplitude: ds.gain * ADU_PER_GAIN,
            gain_spread: 0.0,
            gain_drift: 0.0,
        }
    }

    /// Look up a preset by its short name (`25CS`, `50CS`, `25PS`).
    pub fn preset(name: &str) -> Option<Self> {
        DATASHEETS
            .iter()
            .find(|d| d.name.eq_ignore_ascii_case(name))
            .map(Self::from_datasheet)
    }

    /// Unit-efficiency detector without pile-up, cross-talk or dark counts.
    pub fn ideal(pde: f64) -> Self {
        Self {
            n_cells: 1 << 40,
            pde,
            crosstalk_prob: 0.0,
            dark_rate: 0.0,
            gain: 1.0e6,
            pulse_tau: DEFAULT_PULSE_TAU_NS,
            cell_amplitude: 100.0,
            gain_spread: 0.0,
            gain_drift: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cells == 0 {
            return Err(config("n_cells must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.pde) {
            return Err(config(format!("pde must lie in [0, 1], got {}", self.pde)));
        }
        if !(0.0..1.0).contains(&self.crosstalk_prob) {
            return Err(config(format!("crosstalk_prob must lie in [0, 1), got {}", self.crosstalk_prob)));
        }
        if !(self.dark_rate >= 0.0 && self.dark_rate.is_finite()) {
            return Err(config("dark_rate must be finite and >= 0"));
        }
        if !(self.gain > 0.0 && self.pulse_tau > 0.0 && self.cell_amplitude > 0.0) {
            return Err(config("gain, pulse_tau and cell_amplitude must be > 0"));
        }
        if !(0.0..1.0).contains(&self.gain_spread) {
            return Err(config("gain_spread must lie in [0, 1)"));
        }
        if !(0.0..0.2).contains(&self.gain_drift) {
            return Err(config("gain_drift must lie in [0, 0.2)"));
        }
        Ok(())
    }

    /// Pole-zero coefficient matching this pulse shape at 1 ns sampling.
    pub fn pole_zero_coefficient(&self) -> f64 {
        (-SAMPLE_PERIOD_NS / self.pulse_tau).exp()
    }
}

/// Per-event bookkeeping of the detection chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionOutcome {
    pub n_in: u64,
    pub m_detected: u64,
    pub fired_primary: u64,
    pub fired_total: u64,
}

/// Binomial(n, η) variate: inversion on chunks of at most 512 trials, on the
/// smaller of η and 1 − η so that the starting probability never underflows.
pub fn thin_bernoulli<R: Rng + ?Sized>(rng: &mut R, n: u64, eta: f64) -> u64 {
    if eta >= 1.0 {
        return n;
    }
    if eta <= 0.0 || n == 0 {
        return 0;
    }
    let flip = eta > 0.5;
    let p = if flip { 1.0 - eta } else { eta };
    let q = 1.0 - p;
    let ratio = p / q;
    let mut remaining = n;
    let mut k_total = 0;
    while remaining > 0 {
        let trials = remaining.min(512);
        remaining -= trials;
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut pk = q.powi(trials as i32);
        let mut cdf = pk;
        while u > cdf && k < trials {
            pk *= (trials - k) as f64 / (k + 1) as f64 * ratio;
            k += 1;
            cdf += pk;
        }
        k_total += k;
    }
    if flip {
        n - k_total
    } else {
        k_total
    }
}

/// Number of distinct cells hit when `m` photoelectrons land uniformly on
/// `n_cells` cells.
pub fn assign_cells<R: Rng + ?Sized>(rng: &mut R, m: u64, n_cells: u64) -> u64 {
    if m == 0 {
        return 0;
    }
    if n_cells <= 1 << 20 {
        let mut bits = vec![0u64; n_cells.div_ceil(64) as usize];
        let mut fired = 0;
        for _ in 0..m {
            let c = rng.random_range(0..n_cells);
            let (w, b) = ((c / 64) as usize, c % 64);
            if bits[w] & (1 << b) == 0 {
                bits[w] |= 1 << b;
                fired += 1;
            }
        }
        fired
    } else {
        let mut seen = HashSet::with_capacity(m as usize);
        for _ in 0..m {
            seen.insert(rng.random_range(0..n_cells));
        }
        seen.len() as u64
    }
}

/// Optical cross-talk as a Poisson branching cascade: every avalanche, of
/// any generation, triggers Poisson(λ) further ones with λ = −ln(1 − p_ct).
/// The total is capped at the cell count.
pub fn apply_crosstalk<R: Rng + ?Sized>(rng: &mut R, fired: u64, p_ct: f64, n_cells: u64) -> u64 {
    if p_ct <= 0.0 || fired == 0 {
        return fired.min(n_cells);
    }
    let lambda = -(1.0 - p_ct).ln();
    let mut total = fired;
    let mut generation = fired;
    while generation > 0 && total < n_cells {
        // A sum of independent Poisson(λ) draws is Poisson(λ·count).
        generation = sample_coherent(rng, lambda * generation as f64);
        total += generation;
    }
    total.min(n_cells)
}

/// Dark avalanches inside a gate of `gate_ns`.
pub fn add_dark_counts<R: Rng + ?Sized>(rng: &mut R, dark_rate_hz: f64, gate_ns: f64) -> u64 {
    sample_coherent(rng, dark_rate_hz * gate_ns * 1e-9)
}

/// Full detection chain for `n_in` incident photons.
pub fn detect<R: Rng + ?Sized>(rng: &mut R, n_in: u64, cfg: &SiPMConfig, gate_ns: f64) -> DetectionOutcome {
    let m_detected = thin_bernoulli(rng, n_in, cfg.pde);
    let fired_primary = assign_cells(rng, m_detected, cfg.n_cells);
    let with_ct = apply_crosstalk(rng, fired_primary, cfg.crosstalk_prob, cfg.n_cells);
    let dark = if cfg.dark_rate > 0.0 { add_dark_counts(rng, cfg.dark_rate, gate_ns) } else { 0 };
    DetectionOutcome {
        n_in,
        m_detected,
        fired_primary,
        fired_total: (with_ct + dark).min(cfg.n_cells),
    }
}
