use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DetectionOutcome, SiPMConfig};
use crate::error::{config, Result};

pub const ADC_MIN: i16 = -8192;
pub const ADC_MAX: i16 = 8191;
pub const SAMPLE_PERIOD_NS: f64 = 1.0;

/// Samples a pulse must have after its onset for the longest gate (20 ns).
const MIN_TAIL: usize = 21;

/// One digitized record of 14-bit ADC codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Waveform {
    pub samples: Vec<i16>,
    pub trigger_index: u32,
}

impl Waveform {
    pub fn sample_period_ns(&self) -> f64 {
        SAMPLE_PERIOD_NS
    }

    pub fn from_analog(trace: &[f64], trigger_index: u32) -> Self {
        Self {
            samples: trace.iter().map(|&v| quantize(v)).collect(),
            trigger_index,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Acquisition-side parameters for waveform synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveformParams {
    pub record_len: usize,
    /// Baseline offset, ADU.
    pub baseline: f64,
    /// Electronic noise σ_e, ADU per sample.
    pub noise_sigma: f64,
    /// Trigger jitter σ_j, ns. 0 models a synchronous acquisition.
    pub jitter_ns: f64,
    /// Nominal pulse onset, also written as the record's trigger index.
    pub onset: usize,
}

impl Default for WaveformParams {
    fn default() -> Self {
        Self {
            record_len: 200,
            baseline: -6000.0,
            noise_sigma: 4.0,
            jitter_ns: 0.0,
            onset: 96,
        }
    }
}

impl WaveformParams {
    pub fn validate(&self) -> Result<()> {
        if self.onset + MIN_TAIL > self.record_len {
            return Err(config(format!(
                "record of {} samples too short for onset {} plus a {MIN_TAIL}-sample gate",
                self.record_len, self.onset
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.jitter_ns >= 0.0) {
            return Err(config("noise_sigma and jitter_ns must be >= 0"));
        }
        Ok(())
    }
}

/// Round half to even, then clip to the 14-bit signed range.
pub fn quantize(v: f64) -> i16 {
    let r = v.round_ties_even();
    r.clamp(ADC_MIN as f64, ADC_MAX as f64) as i16
}

/// Noise-free analog trace: baseline plus an exponential pulse of height
/// `amplitude` starting at continuous time `t0` (ns from record start).
pub fn analog_trace(params: &WaveformParams, amplitude: f64, tau_ns: f64, t0: f64) -> Vec<f64> {
    (0..params.record_len)
        .map(|k| {
            let dt = k as f64 * SAMPLE_PERIOD_NS - t0;
            if dt >= 0.0 && amplitude != 0.0 {
                params.baseline + amplitude * (-dt / tau_ns).exp()
            } else {
                params.baseline
            }
        })
        .collect()
}

/// Synthesize the digitized record for one detection outcome.
///
/// The pulse starts at `onset + jitter` with a continuous jitter draw, so a
/// non-zero jitter moves the first sample along the exponential and scales
/// the deconvolved spike. Per-cell amplitudes are spread by `gain_spread`,
/// and the whole pulse by a common factor of width `gain_drift`.
pub fn synthesize_waveform<R: Rng + ?Sized>(
    rng: &mut R,
    outcome: &DetectionOutcome,
    cfg: &SiPMConfig,
    params: &WaveformParams,
) -> Result<Waveform> {
    params.validate()?;
    let jitter = if params.jitter_ns > 0.0 {
        params.jitter_ns * rng.sample::<f64, _>(StandardNormal)
    } else {
        0.0
    };
    let t0 = params.onset as f64 + jitter;
    let cells = outcome.fired_total;
    let amplitude = if cfg.gain_spread > 0.0 {
        (0..cells)
            .map(|_| cfg.cell_amplitude * (1.0 + cfg.gain_spread * rng.sample::<f64, _>(StandardNormal)))
            .sum()
    } else {
        cells as f64 * cfg.cell_amplitude
    };
    let amplitude = if cfg.gain_drift > 0.0 {
        amplitude * (1.0 + cfg.gain_drift * rng.sample::<f64, _>(StandardNormal))
    } else {
        amplitude
    };
    let mut trace = analog_trace(params, amplitude, cfg.pulse_tau, t0);
    if params.noise_sigma > 0.0 {
        for v in &mut trace {
            *v += params.noise_sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(Waveform::from_analog(&trace, params.onset as u32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{event_rng, Purpose};

    fn outcome(fired: u64) -> DetectionOutcome {
        DetectionOutcome { n_in: fired, m_detected: fired, fired_primary: fired, fired_total: fired }
    }

    fn quiet() -> WaveformParams {
        WaveformParams { noise_sigma: 0.0, jitter_ns: 0.0, ..Default::default() }
    }

    #[test]
    fn quantizer_rounds_half_even_and_clips() {
        assert_eq!(quantize(0.5), 0);
        assert_eq!(quantize(1.5), 2);
        assert_eq!(quantize(-2.5), -2);
        assert_eq!(quantize(1e6), ADC_MAX);
        assert_eq!(quantize(-1e6), ADC_MIN);
    }

    #[test]
    fn empty_outcome_is_flat_baseline() {
        let cfg = SiPMConfig::preset("25CS").unwrap();
        let mut rng = event_rng(1, Purpose::Waveform1, 0);
        let wf = synthesize_waveform(&mut rng, &outcome(0), &cfg, &quiet()).unwrap();
        assert!(wf.samples.iter().all(|&s| s == -6000));
        assert_eq!(wf.trigger_index, 96);
    }

    #[test]
    fn single_cell_follows_exponential() {
        let cfg = SiPMConfig::preset("25CS").unwrap();
        let params = WaveformParams { baseline: 0.0, ..quiet() };
        let mut rng = event_rng(1, Purpose::Waveform1, 0);
        let wf = synthesize_waveform(&mut rng, &outcome(1), &cfg, &params).unwrap();
        for (k, &s) in wf.samples.iter().enumerate() {
            let expect = if k >= params.onset {
                quantize(cfg.cell_amplitude * (-((k - params.onset) as f64) / cfg.pulse_tau).exp())
            } else {
                0
            };
            assert_eq!(s, expect, "sample {k}");
        }
    }

    #[test]
    fn pulse_is_linear_in_fired_cells() {
        let params = WaveformParams { baseline: 0.0, ..quiet() };
        let a1 = analog_trace(&params, 70.0, 20.0, 96.0);
        let a2 = analog_trace(&params, 140.0, 20.0, 96.0);
        for (x, y) in a1.iter().zip(&a2) {
            if *x != 0.0 {
                assert_eq!(y / x, 2.0);
            }
        }
    }

    #[test]
    fn short_record_rejected() {
        let cfg = SiPMConfig::preset("25CS").unwrap();
        let params = WaveformParams { record_len: 100, onset: 90, ..quiet() };
        let mut rng = event_rng(1, Purpose::Waveform1, 0);
        assert!(synthesize_waveform(&mut rng, &outcome(1), &cfg, &params).is_err());
    }
}
