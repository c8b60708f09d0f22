//! Seeded end-to-end event generation.
//!
//! Each event draws from its own counter-based streams, one per purpose
//! (source, detector, waveform, per arm), so the ensemble is a pure function
//! of `(config, seed)` whatever the worker count.

use pnr_core::dsp_pipeline::{process_event, process_pair, ChargeEvent};
use pnr_core::rng::{event_rng, Purpose};
use pnr_core::sipm_model::{detect, synthesize_waveform, thin_bernoulli, Waveform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Mode, Resolved, RunConfig};
use crate::error::{HarnessError, Result};

/// Fired cells (after cross-talk and dark counts) of one event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountEvent {
    pub event: u64,
    pub m1: u64,
    pub m2: Option<u64>,
}

#[derive(Debug, Clone, Default)]
pub struct SimOutput {
    pub counts: Vec<CountEvent>,
    /// Gated charges, full-waveform mode only; untriggered events are absent.
    pub charges: Vec<ChargeEvent>,
    /// Records per channel, kept only on request.
    pub waveforms: Vec<Vec<Waveform>>,
    pub untriggered: usize,
}

impl SimOutput {
    pub fn arms(&self) -> usize {
        if self.counts.first().is_some_and(|c| c.m2.is_some()) {
            2
        } else {
            1
        }
    }
}

struct EventOut {
    count: CountEvent,
    charge: Option<ChargeEvent>,
    records: Vec<Waveform>,
}

/// Maps `f` over `0..n` on `workers` threads (the global pool when `None`),
/// keeping index order.
pub fn par_map<T, F>(n: u64, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let job = || (0..n).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    match workers {
        None => job(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| HarnessError::config(format!("cannot start {w} workers: {e}")))?
            .install(job),
    }
}

/// Runs the configured experiment. `keep_waveforms` retains the digitized
/// records in full-waveform mode.
pub fn simulate(cfg: &RunConfig, keep_waveforms: bool) -> Result<SimOutput> {
    let resolved = cfg.validate()?;
    let events = par_map(cfg.events, cfg.workers, |i| simulate_event(cfg, &resolved, i, keep_waveforms))?;
    let arms = resolved.detectors.len();
    let mut out = SimOutput {
        counts: Vec::with_capacity(events.len()),
        waveforms: if keep_waveforms && cfg.mode == Mode::FullWaveform { vec![Vec::new(); arms] } else { Vec::new() },
        ..Default::default()
    };
    for ev in events {
        out.counts.push(ev.count);
        if cfg.mode == Mode::FullWaveform {
            match ev.charge {
                Some(c) => out.charges.push(c),
                None => out.untriggered += 1,
            }
        }
        for (k, r) in ev.records.into_iter().enumerate() {
            out.waveforms[k].push(r);
        }
    }
    Ok(out)
}

fn simulate_event(cfg: &RunConfig, resolved: &Resolved, i: u64, keep: bool) -> Result<EventOut> {
    let dets = &resolved.detectors;
    let mut src = event_rng(cfg.seed, Purpose::Source, i);
    let photons = cfg.source.sample(&mut src);
    let (n1, n2) = match (photons.n2, dets.len()) {
        (Some(n2), _) => (photons.n1, Some(n2)),
        (None, 2) => {
            let t = thin_bernoulli(&mut src, photons.n1, cfg.split_ratio);
            (t, Some(photons.n1 - t))
        }
        (None, _) => (photons.n1, None),
    };
    let gate = cfg.pipeline.gate_len_ns as f64;
    let o1 = detect(&mut event_rng(cfg.seed, Purpose::Detector1, i), n1, &dets[0], gate);
    let o2 = n2.map(|n| detect(&mut event_rng(cfg.seed, Purpose::Detector2, i), n, &dets[1], gate));
    let count = CountEvent { event: i, m1: o1.fired_total, m2: o2.map(|o| o.fired_total) };
    if cfg.mode == Mode::CountsOnly {
        return Ok(EventOut { count, charge: None, records: Vec::new() });
    }

    let params = cfg.waveform_params();
    let wf1 = synthesize_waveform(&mut event_rng(cfg.seed, Purpose::Waveform1, i), &o1, &dets[0], &params)?;
    let wf2 = o2
        .map(|o| synthesize_waveform(&mut event_rng(cfg.seed, Purpose::Waveform2, i), &o, &dets[1], &params))
        .transpose()?;
    let index = i as u32;
    let charge = match &wf2 {
        Some(w2) => process_pair(index, &wf1, w2, &cfg.pipeline)?,
        None => process_event(&wf1, &cfg.pipeline)?.map(|q1| ChargeEvent { event_index: index, q1, q2: None }),
    };
    let records = if keep { std::iter::once(wf1).chain(wf2).collect() } else { Vec::new() };
    Ok(EventOut { count, charge, records })
}
