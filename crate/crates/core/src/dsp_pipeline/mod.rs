//! Software golden model of the acquisition firmware.
//!
//! Per record, in one pass over the samples:
//!
//! ```text
//! x ─► signal delay ─► baseline restorer ─► pole-zero ─► gated sum ─► Q
//! │                          ▲ freeze
//! └─► discriminator ─► trigger delay ──┘ (Internal mode)
//! ```
//!
//! The trigger time `t` is expressed in the delayed-signal timeline. The
//! restorer is frozen from `t` for `holdoff` samples and the gate covers
//! `t + gate_offset ..= t + gate_offset + gate_len_ns`. State is rebuilt for
//! every record, so events are independent.

mod charge_io;
mod stages;

pub use charge_io::{read_charge_binary, read_charge_csv, write_charge_binary, write_charge_csv};
pub use stages::{
    leading_edge_trigger, qdc_integrate, BaselineRestorer, DelayLine, FixedBaselineRestorer,
    FixedPoleZero, PoleZero, FIXED_FRAC_BITS,
};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::sipm_model::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerMode {
    /// Gate anchored at the record's trigger index (photodiode / digitizer clock).
    External,
    /// Gate opened by the leading-edge discriminator.
    Internal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arithmetic {
    #[default]
    Float,
    /// Integer datapath with 2¹⁶ scaling of `a` and `G`.
    Fixed,
}

/// Register-equivalent firmware settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Moving-average length of the baseline restorer, samples.
    pub baseline_window: usize,
    /// Samples of baseline freeze after a trigger; `None` freezes to the end of the record.
    pub holdoff: Option<usize>,
    /// Pole-zero coefficient `a = exp(−T_s/τ)`.
    pub a: f64,
    /// Digital gain `G`.
    pub g: f64,
    pub gate_len_ns: u32,
    /// Gate start relative to the trigger, samples; negative values integrate pre-trigger samples.
    pub gate_offset: i64,
    pub signal_delay: usize,
    pub trigger_delay: usize,
    /// Discriminator threshold on the baseline-subtracted input, ADU.
    pub threshold: f64,
    pub trigger_mode: TriggerMode,
    pub arithmetic: Arithmetic,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            baseline_window: 64,
            holdoff: None,
            a: (-1.0f64 / 20.0).exp(),
            g: 1.0,
            gate_len_ns: 10,
            gate_offset: 1,
            signal_delay: 6,
            trigger_delay: 0,
            threshold: 35.0,
            trigger_mode: TriggerMode::External,
            arithmetic: Arithmetic::Float,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.baseline_window == 0 {
            return Err(config("baseline_window must be >= 1"));
        }
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(config(format!("pole-zero coefficient must lie in (0, 1), got {}", self.a)));
        }
        if !(self.g > 0.0 && self.g.is_finite()) {
            return Err(config("digital gain must be > 0"));
        }
        if !(10..=20).contains(&self.gate_len_ns) {
            return Err(config(format!("gate_len_ns must lie in [10, 20], got {}", self.gate_len_ns)));
        }
        if !self.threshold.is_finite() {
            return Err(config("threshold must be finite"));
        }
        Ok(())
    }

    /// Samples integrated per gate.
    pub fn gate_samples(&self) -> usize {
        self.gate_len_ns as usize + 1
    }

    fn gate_start(&self, trigger: usize) -> Result<usize> {
        let n0 = trigger as i64 + self.gate_offset;
        usize::try_from(n0).map_err(|_| config(format!("gate starts before the record (sample {n0})")))
    }
}

/// Integrated charges of one trigger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeEvent {
    pub event_index: u32,
    pub q1: f64,
    pub q2: Option<f64>,
}

/// Where a channel takes its gate anchor from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    /// Use the configured trigger mode.
    Configured,
    /// Trigger time already known (delayed-signal timeline), e.g. from a partner channel.
    Shared(usize),
}

/// Result of one channel pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelOutput {
    pub q: f64,
    /// Trigger time in the delayed-signal timeline.
    pub trigger: usize,
}

/// Runs one record through the chain; `Ok(None)` flags a record without trigger.
pub fn process_channel(wf: &Waveform, cfg: &PipelineConfig, anchor: Anchor) -> Result<Option<ChannelOutput>> {
    cfg.validate()?;
    match cfg.arithmetic {
        Arithmetic::Float => run::<FloatPath>(wf, cfg, anchor),
        Arithmetic::Fixed => run::<FixedPath>(wf, cfg, anchor),
    }
}

/// Integrated charge of a single record, or `None` when no trigger fired.
pub fn process_event(wf: &Waveform, cfg: &PipelineConfig) -> Result<Option<f64>> {
    Ok(process_channel(wf, cfg, Anchor::Configured)?.map(|o| o.q))
}

/// Processes two channels of one event with the trigger of the first.
pub fn process_pair(
    event_index: u32,
    wf1: &Waveform,
    wf2: &Waveform,
    cfg: &PipelineConfig,
) -> Result<Option<ChargeEvent>> {
    let Some(first) = process_channel(wf1, cfg, Anchor::Configured)? else {
        return Ok(None);
    };
    let second = process_channel(wf2, cfg, Anchor::Shared(first.trigger))?
        .expect("a shared anchor always triggers");
    Ok(Some(ChargeEvent { event_index, q1: first.q, q2: Some(second.q) }))
}

/// Float-mode restorer and pole-zero output for every input sample, with the
/// restorer frozen from `freeze_from` onwards. Delay lines and gate are not applied.
pub fn filter_trace(samples: &[f64], cfg: &PipelineConfig, freeze_from: Option<usize>) -> Vec<f64> {
    let mut restorer = BaselineRestorer::new(cfg.baseline_window);
    let mut pz = PoleZero::new(cfg.a, cfg.g);
    samples
        .iter()
        .enumerate()
        .map(|(n, &x)| pz.step(restorer.step(x, freeze_from.is_some_and(|f| n >= f))))
        .collect()
}

/// Arithmetic of the filter datapath.
trait Datapath {
    type Value: Copy + Default;
    fn new(cfg: &PipelineConfig) -> Self;
    /// Raw-input discriminator value against the current baseline estimate.
    fn discriminator(&self, x: i16) -> f64;
    fn step(&mut self, x: i16, frozen: bool) -> Self::Value;
    fn accumulate(acc: &mut Self::Value, y: Self::Value);
    fn finish(acc: Self::Value) -> f64;
}

struct FloatPath {
    restorer: BaselineRestorer,
    pz: PoleZero,
}

impl Datapath for FloatPath {
    type Value = f64;

    fn new(cfg: &PipelineConfig) -> Self {
        Self { restorer: BaselineRestorer::new(cfg.baseline_window), pz: PoleZero::new(cfg.a, cfg.g) }
    }

    fn discriminator(&self, x: i16) -> f64 {
        let x = x as f64;
        x - self.restorer.estimate().unwrap_or(x)
    }

    fn step(&mut self, x: i16, frozen: bool) -> f64 {
        self.pz.step(self.restorer.step(x as f64, frozen))
    }

    fn accumulate(acc: &mut f64, y: f64) {
        *acc += y;
    }

    fn finish(acc: f64) -> f64 {
        acc
    }
}

struct FixedPath {
    restorer: FixedBaselineRestorer,
    pz: FixedPoleZero,
}

impl Datapath for FixedPath {
    type Value = i64;

    fn new(cfg: &PipelineConfig) -> Self {
        Self {
            restorer: FixedBaselineRestorer::new(cfg.baseline_window),
            pz: FixedPoleZero::new(cfg.a, cfg.g),
        }
    }

    fn discriminator(&self, x: i16) -> f64 {
        let x = x as i64;
        (x - self.restorer.estimate().unwrap_or(x)) as f64
    }

    fn step(&mut self, x: i16, frozen: bool) -> i64 {
        self.pz.step(self.restorer.step(x as i64, frozen))
    }

    fn accumulate(acc: &mut i64, y: i64) {
        *acc += y;
    }

    fn finish(acc: i64) -> f64 {
        acc as f64 / (1i64 << FIXED_FRAC_BITS) as f64
    }
}

fn run<D: Datapath>(wf: &Waveform, cfg: &PipelineConfig, anchor: Anchor) -> Result<Option<ChannelOutput>> {
    let len = wf.samples.len();
    let gate = cfg.gate_len_ns as usize;
    let check_gate = |t: usize| -> Result<(usize, usize)> {
        let n0 = cfg.gate_start(t)?;
        if n0 + gate >= len {
            return Err(config(format!(
                "gate {n0}..={} exceeds record of {len} samples",
                n0 + gate
            )));
        }
        Ok((n0, n0 + gate))
    };

    let mut trigger = match anchor {
        Anchor::Shared(t) => Some(t),
        Anchor::Configured => match cfg.trigger_mode {
            TriggerMode::External => Some(wf.trigger_index as usize + cfg.trigger_delay),
            TriggerMode::Internal => None,
        },
    };
    let mut gate_bounds = trigger.map(check_gate).transpose()?;

    // Processed samples that may still fall into a gate opened later by the
    // internal discriminator (negative gate offsets).
    let lookback = (-(cfg.gate_offset + cfg.trigger_delay as i64)).max(0) as usize;
    let mut history: VecDeque<D::Value> = VecDeque::with_capacity(lookback + 1);

    let mut path = D::new(cfg);
    let mut delay = DelayLine::new(cfg.signal_delay);
    let mut acc = D::Value::default();

    for (n, &x) in wf.samples.iter().enumerate() {
        if trigger.is_none() && path.discriminator(x) >= cfg.threshold {
            let t = n + cfg.trigger_delay;
            let (n0, n1) = check_gate(t)?;
            // Gate samples already processed sit at the back of the history.
            let back = n.saturating_sub(n0).min(history.len());
            let first = n - back;
            for (k, &y) in history.iter().skip(history.len() - back).enumerate() {
                if first + k <= n1 {
                    D::accumulate(&mut acc, y);
                }
            }
            trigger = Some(t);
            gate_bounds = Some((n0, n1));
        }

        let xs = delay.push(x);
        let frozen = trigger.is_some_and(|t| n >= t && cfg.holdoff.is_none_or(|h| n < t + h));
        let y = path.step(xs, frozen);

        match gate_bounds {
            Some((n0, n1)) if (n0..=n1).contains(&n) => D::accumulate(&mut acc, y),
            Some((_, n1)) if n > n1 => break,
            Some(_) => {}
            None if lookback > 0 => {
                if history.len() == lookback {
                    history.pop_front();
                }
                history.push_back(y);
            }
            None => {}
        }
    }

    Ok(trigger.map(|t| ChannelOutput { q: D::finish(acc), trigger: t }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(len: usize, level: i16, trigger: u32) -> Waveform {
        Waveform { samples: vec![level; len], trigger_index: trigger }
    }

    #[test]
    fn zero_waveform_zero_charge() {
        let cfg = PipelineConfig::default();
        assert_eq!(process_event(&flat(200, 0, 96), &cfg).unwrap(), Some(0.0));
        assert_eq!(process_event(&flat(200, -6000, 96), &cfg).unwrap(), Some(0.0));
    }

    #[test]
    fn internal_mode_without_pulse_flags_event() {
        let cfg = PipelineConfig { trigger_mode: TriggerMode::Internal, ..Default::default() };
        assert_eq!(process_event(&flat(200, 12, 96), &cfg).unwrap(), None);
    }

    #[test]
    fn gate_outside_record_is_config_error() {
        let cfg = PipelineConfig::default();
        assert!(process_event(&flat(100, 0, 90), &cfg).is_err());
        let cfg = PipelineConfig { gate_offset: -200, ..Default::default() };
        assert!(process_event(&flat(300, 0, 96), &cfg).is_err());
    }

    #[test]
    fn gate_length_register_range() {
        for (len, ok) in [(9, false), (10, true), (20, true), (21, false)] {
            let cfg = PipelineConfig { gate_len_ns: len, ..Default::default() };
            assert_eq!(cfg.validate().is_ok(), ok);
        }
    }

    #[test]
    fn pair_with_zero_partner() {
        let cfg = PipelineConfig::default();
        let mut s = vec![0i16; 200];
        s[96] = 100;
        let wf1 = Waveform { samples: s, trigger_index: 96 };
        let ev = process_pair(3, &wf1, &flat(200, 0, 96), &cfg).unwrap().unwrap();
        assert_eq!(ev.event_index, 3);
        assert_eq!(ev.q2, Some(0.0));
        assert!(ev.q1 > 0.0);
        let same = process_pair(0, &wf1, &wf1, &cfg).unwrap().unwrap();
        assert_eq!(Some(same.q1), same.q2);
    }
}
